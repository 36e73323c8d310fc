//! The Tri-Former block: parallel spectral/spatial attention token mixer
//! plus a conv-enhanced channel mixer, in a pre-norm residual layout.

use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::net::attention::{spatial_attention, spectral_attention, Attention, AttentionVars};
use crate::net::model::{normal_tensor, reg};
use crate::scalar::Scalar;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Epsilon used by every layer norm in the network.
pub const LN_EPS: f64 = 1e-5;

/// One Tri-Former block at width `C`.
#[derive(Debug, Clone)]
pub struct Block<T: Scalar> {
    pub norm1_gamma: Tensor<T>,
    pub norm1_beta: Tensor<T>,
    pub spec: Attention<T>,
    pub spat: Attention<T>,
    pub norm2_gamma: Tensor<T>,
    pub norm2_beta: Tensor<T>,
    /// Depthwise 3x3x3 kernel `[3,3,3,1,C]`.
    pub dw: Tensor<T>,
    /// Pointwise expansion `[C, r*C]` plus bias.
    pub pw1_w: Tensor<T>,
    pub pw1_b: Tensor<T>,
    /// Pointwise projection `[r*C, C]` plus bias.
    pub pw2_w: Tensor<T>,
    pub pw2_b: Tensor<T>,
}

#[derive(Debug, Clone, Copy)]
pub struct BlockVars {
    pub norm1_gamma: Var,
    pub norm1_beta: Var,
    pub spec: AttentionVars,
    pub spat: AttentionVars,
    pub norm2_gamma: Var,
    pub norm2_beta: Var,
    pub dw: Var,
    pub pw1_w: Var,
    pub pw1_b: Var,
    pub pw2_w: Var,
    pub pw2_b: Var,
}

impl<T: Scalar> Block<T> {
    pub fn init(channels: usize, heads: usize, mlp_ratio: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let hidden = channels * mlp_ratio;
        Ok(Block {
            norm1_gamma: Tensor::full(vec![channels], T::one())?,
            norm1_beta: Tensor::zeros(vec![channels]),
            spec: Attention::init(channels, heads, rng)?,
            spat: Attention::init(channels, heads, rng)?,
            norm2_gamma: Tensor::full(vec![channels], T::one())?,
            norm2_beta: Tensor::zeros(vec![channels]),
            dw: normal_tensor(vec![3, 3, 3, 1, channels], (2.0 / 27.0f64).sqrt(), rng)?,
            pw1_w: normal_tensor(vec![channels, hidden], 0.02, rng)?,
            pw1_b: Tensor::zeros(vec![hidden]),
            pw2_w: normal_tensor(vec![hidden, channels], 0.02, rng)?,
            pw2_b: Tensor::zeros(vec![channels]),
        })
    }

    pub fn bind(&self, tape: &mut Tape<T>, trainable: bool) -> Result<BlockVars> {
        Ok(BlockVars {
            norm1_gamma: reg(tape, &self.norm1_gamma, trainable)?,
            norm1_beta: reg(tape, &self.norm1_beta, trainable)?,
            spec: self.spec.bind(tape, trainable)?,
            spat: self.spat.bind(tape, trainable)?,
            norm2_gamma: reg(tape, &self.norm2_gamma, trainable)?,
            norm2_beta: reg(tape, &self.norm2_beta, trainable)?,
            dw: reg(tape, &self.dw, trainable)?,
            pw1_w: reg(tape, &self.pw1_w, trainable)?,
            pw1_b: reg(tape, &self.pw1_b, trainable)?,
            pw2_w: reg(tape, &self.pw2_w, trainable)?,
            pw2_b: reg(tape, &self.pw2_b, trainable)?,
        })
    }
}

/// Depthwise 3x3x3 conv, then pointwise C -> r*C, GELU, r*C -> C.
pub fn channel_mixer<T: Scalar>(tape: &mut Tape<T>, x: Var, p: &BlockVars) -> Result<Var> {
    let shape = tape.shape(x).to_vec();
    let channels = *shape.last().expect("5-D input");
    let sites: usize = shape[..4].iter().product();

    let mixed = tape.conv3d(x, p.dw, [1, 1, 1], crate::kernels::Padding::Same, channels)?;
    let flat = tape.reshape(mixed, vec![sites, channels])?;
    let up = tape.matmul(flat, p.pw1_w)?;
    let up = tape.bias_add(up, p.pw1_b)?;
    let up = tape.gelu(up)?;
    let down = tape.matmul(up, p.pw2_w)?;
    let down = tape.bias_add(down, p.pw2_b)?;
    tape.reshape(down, shape)
}

/// Full pre-norm block:
/// `y = x + spec(norm1(x)) + spat(norm1(x)); out = y + mixer(norm2(y))`.
pub fn block_forward<T: Scalar>(tape: &mut Tape<T>, x: Var, p: &BlockVars) -> Result<Var> {
    let n1 = tape.layer_norm(x, p.norm1_gamma, p.norm1_beta, LN_EPS)?;
    let a = spectral_attention(tape, n1, &p.spec)?;
    let b = spatial_attention(tape, n1, &p.spat)?;
    let y = tape.add(x, a)?;
    let y = tape.add(y, b)?;

    let n2 = tape.layer_norm(y, p.norm2_gamma, p.norm2_beta, LN_EPS)?;
    let m = channel_mixer(tape, n2, p)?;
    tape.add(y, m)
}
