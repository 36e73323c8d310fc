//! Central-difference gradient verification.

use crate::error::{Error, Result};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Compares the analytic gradient of `f` at `x` against central differences.
///
/// `f` must build a scalar loss from the registered input on the given tape.
/// Returns the max over elements of
/// `|analytic - numeric| / max(1, |numeric|)`.
///
/// Run this at `f64`: with the default `h = 1e-6` the truncation and
/// round-off error are both far below the 1e-5 acceptance threshold.
pub fn grad_check<F>(f: F, x: &Tensor<f64>, h: f64) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, Var) -> Result<Var>,
{
    if h <= 0.0 {
        return Err(Error::usage(format!("step size must be positive, got {h}")));
    }
    let mut tape = Tape::new();
    let xv = tape.param(x)?;
    let loss = f(&mut tape, xv)?;
    if tape.shape(loss).iter().product::<usize>() != 1 {
        return Err(Error::usage(format!(
            "grad_check needs a scalar loss, got shape {:?}",
            tape.shape(loss)
        )));
    }
    let grads = tape.backward(loss)?;
    let analytic = grads
        .get(xv)
        .ok_or_else(|| Error::usage("loss does not depend on the checked input"))?;

    let eval = |data: &[f64]| -> Result<f64> {
        let t = Tensor::from_vec(x.shape().to_vec(), data.to_vec())?;
        let mut tape = Tape::new();
        let xv = tape.param(&t)?;
        let loss = f(&mut tape, xv)?;
        tape.scalar(loss)
    };

    let mut worst = 0.0f64;
    let mut probe = x.data().to_vec();
    for i in 0..probe.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = eval(&probe)?;
        probe[i] = orig - h;
        let down = eval(&probe)?;
        probe[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let rel = (analytic[i] - numeric).abs() / numeric.abs().max(1.0);
        if rel > worst {
            worst = rel;
        }
    }
    Ok(worst)
}
