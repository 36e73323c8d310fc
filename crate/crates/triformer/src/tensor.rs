use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major strides for a shape. Empty shape (scalar) gives empty strides.
pub fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![0; shape.len()];
    let mut acc = 1;
    for (s, &dim) in strides.iter_mut().zip(shape.iter()).rev() {
        *s = acc;
        acc *= dim;
    }
    strides
}

/// Number of elements implied by a shape.
pub fn numel_of(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Dense row-major tensor.
///
/// The axis convention for 5-D activations is `[B, H, W, L, C]`: batch, two
/// spatial axes, the spectral axis, and channels. Data is shared behind an
/// `Arc` so that registering a tensor on a tape never copies; the optimizer's
/// in-place update is the only mutation path and goes through copy-on-write.
///
/// `grad` is an optional buffer of identical extent. Gradients accumulate
/// across backward passes until explicitly zeroed or taken.
#[derive(Debug, Clone)]
pub struct Tensor<T: Scalar> {
    shape: Vec<usize>,
    data: Arc<Vec<T>>,
    grad: Option<Vec<T>>,
}

impl<T: Scalar> Tensor<T> {
    /// Builds a tensor, validating element count and finiteness.
    pub fn from_vec(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let n = numel_of(&shape);
        if data.len() != n {
            return Err(Error::shape(format!(
                "shape {shape:?} implies {n} elements, got {}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::numeric(format!(
                "non-finite value {} at flat index {i} in tensor of shape {shape:?}",
                data[i]
            )));
        }
        Ok(Tensor { shape, data: Arc::new(data), grad: None })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = numel_of(&shape);
        Tensor { shape, data: Arc::new(vec![T::zero(); n]), grad: None }
    }

    pub fn full(shape: Vec<usize>, value: T) -> Result<Self> {
        let n = numel_of(&shape);
        Self::from_vec(shape.clone(), vec![value; n])
    }

    /// Converts an `f32` buffer (file formats, patches) into this dtype.
    pub fn from_f32(shape: Vec<usize>, data: &[f32]) -> Result<Self> {
        let converted: Vec<T> = data.iter().map(|&v| T::lit(v as f64)).collect();
        Self::from_vec(shape, converted)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Shared handle to the data, used by the tape to record leaves cheaply.
    pub fn data_arc(&self) -> Arc<Vec<T>> {
        Arc::clone(&self.data)
    }

    /// Mutable view for in-place parameter updates (copy-on-write if the
    /// buffer is still shared with a live tape).
    pub fn data_mut(&mut self) -> &mut [T] {
        Arc::<Vec<T>>::make_mut(&mut self.data).as_mut_slice()
    }

    pub fn grad(&self) -> Option<&[T]> {
        self.grad.as_deref()
    }

    /// Adds a gradient contribution, allocating the buffer on first use.
    pub fn accum_grad(&mut self, g: &[T]) -> Result<()> {
        if g.len() != self.data.len() {
            return Err(Error::shape(format!(
                "gradient length {} does not match tensor of {} elements",
                g.len(),
                self.data.len()
            )));
        }
        let buf = self.grad.get_or_insert_with(|| vec![T::zero(); g.len()]);
        for (a, &b) in buf.iter_mut().zip(g) {
            *a += b;
        }
        Ok(())
    }

    /// Removes and returns the accumulated gradient, leaving `None`.
    pub fn take_grad(&mut self) -> Option<Vec<T>> {
        self.grad.take()
    }

    /// Explicit zeroing between optimizer steps.
    pub fn zero_grad(&mut self) {
        self.grad = None;
    }
}
