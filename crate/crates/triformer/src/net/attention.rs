//! Multi-head self-attention over spectral or spatial token axes.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::net::model::{normal_tensor, reg};
use crate::scalar::Scalar;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Projection weights of one attention module; all four are `[C, C]` and
/// bias-free. No position bias is used anywhere.
#[derive(Debug, Clone)]
pub struct Attention<T: Scalar> {
    pub wq: Tensor<T>,
    pub wk: Tensor<T>,
    pub wv: Tensor<T>,
    pub wo: Tensor<T>,
    pub heads: usize,
}

/// Tape handles for one attention module's weights.
#[derive(Debug, Clone, Copy)]
pub struct AttentionVars {
    pub wq: Var,
    pub wk: Var,
    pub wv: Var,
    pub wo: Var,
    pub heads: usize,
}

impl<T: Scalar> Attention<T> {
    pub fn init(channels: usize, heads: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if heads == 0 || channels % heads != 0 {
            return Err(Error::config(format!(
                "channel count {channels} not divisible by {heads} heads"
            )));
        }
        let shape = vec![channels, channels];
        Ok(Attention {
            wq: normal_tensor(shape.clone(), 0.02, rng)?,
            wk: normal_tensor(shape.clone(), 0.02, rng)?,
            wv: normal_tensor(shape.clone(), 0.02, rng)?,
            wo: normal_tensor(shape, 0.02, rng)?,
            heads,
        })
    }

    pub fn bind(&self, tape: &mut Tape<T>, trainable: bool) -> Result<AttentionVars> {
        Ok(AttentionVars {
            wq: reg(tape, &self.wq, trainable)?,
            wk: reg(tape, &self.wk, trainable)?,
            wv: reg(tape, &self.wv, trainable)?,
            wo: reg(tape, &self.wo, trainable)?,
            heads: self.heads,
        })
    }
}

/// Multi-head scaled dot-product over already-projected `[G, Tok, C]`
/// queries/keys/values: head split, softmax(QKᵀ/√dk)·V, head merge.
pub fn attend_core<T: Scalar>(
    tape: &mut Tape<T>,
    q: Var,
    k: Var,
    v: Var,
    heads: usize,
) -> Result<Var> {
    let shape = tape.shape(q).to_vec();
    let [g, tok, c] = match shape.as_slice() {
        [g, tok, c] => [*g, *tok, *c],
        other => {
            return Err(Error::shape(format!(
                "attention expects [groups, tokens, channels], got {other:?}"
            )))
        }
    };
    if heads == 0 || c % heads != 0 {
        return Err(Error::config(format!(
            "channel count {c} not divisible by {heads} heads"
        )));
    }
    let dk = c / heads;

    // Split heads: [G, Tok, C] -> [G, heads, Tok, dk].
    let split = |tape: &mut Tape<T>, y: Var| -> Result<Var> {
        let y = tape.reshape(y, vec![g, tok, heads, dk])?;
        tape.permute(y, &[0, 2, 1, 3])
    };
    let q = split(tape, q)?;
    let k = split(tape, k)?;
    let v = split(tape, v)?;

    let kt = tape.permute(k, &[0, 1, 3, 2])?;
    let scores = tape.matmul(q, kt)?;
    let scores = tape.scale(scores, 1.0 / (dk as f64).sqrt())?;
    let weights = tape.softmax(scores)?;
    let mixed = tape.matmul(weights, v)?;

    // Merge heads.
    let mixed = tape.permute(mixed, &[0, 2, 1, 3])?;
    tape.reshape(mixed, vec![g, tok, c])
}

/// Scaled dot-product attention over the token axis of `[G, Tok, C]`,
/// where `G` counts independent token groups.
pub fn attend<T: Scalar>(tape: &mut Tape<T>, x: Var, p: &AttentionVars) -> Result<Var> {
    let q = tape.matmul(x, p.wq)?;
    let k = tape.matmul(x, p.wk)?;
    let v = tape.matmul(x, p.wv)?;
    let mixed = attend_core(tape, q, k, v, p.heads)?;
    tape.matmul(mixed, p.wo)
}

/// Attention over the `L` band tokens independently at each spatial site.
pub fn spectral_attention<T: Scalar>(tape: &mut Tape<T>, x: Var, p: &AttentionVars) -> Result<Var> {
    let s = tape.shape(x).to_vec();
    let [b, h, w, l, c] = five(&s)?;
    let tokens = tape.reshape(x, vec![b * h * w, l, c])?;
    let out = attend(tape, tokens, p)?;
    tape.reshape(out, vec![b, h, w, l, c])
}

/// Attention over the `H*W` spatial tokens independently at each band.
pub fn spatial_attention<T: Scalar>(tape: &mut Tape<T>, x: Var, p: &AttentionVars) -> Result<Var> {
    let s = tape.shape(x).to_vec();
    let [b, h, w, l, c] = five(&s)?;
    let banded = tape.permute(x, &[0, 3, 1, 2, 4])?;
    let tokens = tape.reshape(banded, vec![b * l, h * w, c])?;
    let out = attend(tape, tokens, p)?;
    let out = tape.reshape(out, vec![b, l, h, w, c])?;
    tape.permute(out, &[0, 2, 3, 1, 4])
}

fn five(shape: &[usize]) -> Result<[usize; 5]> {
    match shape {
        [b, h, w, l, c] => Ok([*b, *h, *w, *l, *c]),
        other => Err(Error::shape(format!(
            "expected a 5-D [B, H, W, L, C] tensor, got {other:?}"
        ))),
    }
}
