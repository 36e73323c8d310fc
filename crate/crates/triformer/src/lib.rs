//! Hyperspectral image classification with a factorized spectral-spatial
//! transformer, plus a single-direction cross-sensor tuning protocol.
//!
//! The crate is generic over the float type via [`Scalar`]; training defaults
//! to `f32` and gradient checks run the identical code at `f64`.

pub mod data;
pub mod error;
pub mod flops;
pub mod gradcheck;
pub mod kernels;
pub mod net;
pub mod scalar;
pub mod sdt;
pub mod tape;
pub mod train;
pub mod tensor;

pub use error::{Error, Result};
pub use flops::{model_flops_report, CostReport, MixerMode};
pub use gradcheck::grad_check;
pub use kernels::Padding;
pub use net::{Model, TriFormerConfig};
pub use sdt::{DualModel, SdtConfig};
pub use train::{ConfusionMatrix, TrainConfig};
pub use scalar::Scalar;
pub use tape::{Grads, Tape, Var};
pub use tensor::Tensor;

/// Default training precision.
pub type Tensor32 = Tensor<f32>;
/// Double precision, used by the gradient-check suites.
pub type Tensor64 = Tensor<f64>;
pub type Tape32 = Tape<f32>;
pub type Tape64 = Tape<f64>;
