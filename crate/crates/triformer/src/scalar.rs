use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Element type for tensors, models and optimizers: `f32` or `f64`.
///
/// Training defaults to `f32`; gradient-check suites instantiate the same
/// code at `f64`. Everything numeric in this crate is generic over `Scalar`
/// and monomorphizes to plain float loops.
pub trait Scalar:
    Float
    + NumAssignOps
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Dtype tag used in reports and file headers.
    const NAME: &'static str;

    /// Conversion from an `f64` literal (lossy for `f32`).
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    /// Lossy narrowing to `f32`, used by the checkpoint writer.
    #[inline]
    fn to_f32_lossy(self) -> f32 {
        self.to_f32().expect("float-to-float cast")
    }
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";
}
