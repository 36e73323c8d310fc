//! AdamW with decoupled weight decay and per-parameter step counts.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::net::Model;
use crate::scalar::Scalar;

struct ParamState<T> {
    m: Vec<T>,
    v: Vec<T>,
    steps: u64,
}

/// AdamW optimizer state, keyed by parameter name.
pub struct AdamW<T: Scalar> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    state: BTreeMap<String, ParamState<T>>,
}

impl<T: Scalar> Default for AdamW<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> AdamW<T> {
    pub fn new() -> Self {
        AdamW { beta1: 0.9, beta2: 0.999, eps: 1e-8, state: BTreeMap::new() }
    }

    /// One update of a single parameter: decoupled decay `θ·(1−lr·wd)`
    /// first, then the bias-corrected Adam step.
    pub fn step(
        &mut self,
        name: &str,
        theta: &mut [T],
        grad: &[T],
        lr: f64,
        wd: f64,
    ) -> Result<()> {
        if theta.len() != grad.len() {
            return Err(Error::usage(format!(
                "optimizer step for {name}: {} parameters vs {} gradients",
                theta.len(),
                grad.len()
            )));
        }
        let st = self.state.entry(name.to_string()).or_insert_with(|| ParamState {
            m: vec![T::zero(); theta.len()],
            v: vec![T::zero(); theta.len()],
            steps: 0,
        });
        if st.m.len() != theta.len() {
            return Err(Error::usage(format!(
                "optimizer state for {name} sized {}, parameter sized {}",
                st.m.len(),
                theta.len()
            )));
        }
        st.steps += 1;

        let decay = T::lit(1.0 - lr * wd);
        let b1 = T::lit(self.beta1);
        let b2 = T::lit(self.beta2);
        let one_m_b1 = T::lit(1.0 - self.beta1);
        let one_m_b2 = T::lit(1.0 - self.beta2);
        let c1 = T::lit(1.0 - self.beta1.powi(st.steps as i32));
        let c2 = T::lit(1.0 - self.beta2.powi(st.steps as i32));
        let lr_t = T::lit(lr);
        let eps = T::lit(self.eps);

        for ((p, &g), (m, v)) in
            theta.iter_mut().zip(grad).zip(st.m.iter_mut().zip(st.v.iter_mut()))
        {
            *p *= decay;
            *m = b1 * *m + one_m_b1 * g;
            *v = b2 * *v + one_m_b2 * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr_t * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }

    /// Applies pending gradients on every model parameter that has any,
    /// consuming them; parameters without gradients are left alone.
    pub fn apply(&mut self, model: &mut Model<T>, lr: f64, wd: f64) -> Result<()> {
        self.apply_prefixed(model, "", lr, wd)
    }

    /// Like [`apply`](Self::apply), but namespacing the optimizer state so
    /// several models can share one optimizer without name collisions.
    pub fn apply_prefixed(
        &mut self,
        model: &mut Model<T>,
        prefix: &str,
        lr: f64,
        wd: f64,
    ) -> Result<()> {
        let mut failed = None;
        model.visit_mut(&mut |name, t| {
            if failed.is_some() {
                return;
            }
            if let Some(g) = t.take_grad() {
                if let Err(e) = self.step(&format!("{prefix}{name}"), t.data_mut(), &g, lr, wd) {
                    failed = Some(e);
                }
            }
        });
        match failed {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Updates one loose tensor (bridges, auxiliary heads) if it has a
    /// pending gradient.
    pub fn apply_tensor(
        &mut self,
        name: &str,
        t: &mut crate::tensor::Tensor<T>,
        lr: f64,
        wd: f64,
    ) -> Result<()> {
        if let Some(g) = t.take_grad() {
            self.step(name, t.data_mut(), &g, lr, wd)?;
        }
        Ok(())
    }
}
