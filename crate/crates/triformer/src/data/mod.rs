//! Cube container, preprocessing, splitting, and synthetic scenes.

pub mod hsc;
pub mod preprocess;
pub mod pseudo;
pub mod split;
pub mod synthetic;

pub use hsc::{load_hsc, save_hsc, HsiCube, LabelMap};
pub use preprocess::{extract_patch, normalize, spectral_resample};
pub use pseudo::{rgb_to_pseudo_hsi, PSEUDO_BANDS};
pub use split::{split_per_class, Split, SplitSpec};
pub use synthetic::{gen_synthetic, SensorSpec, SensorTransform, SyntheticScene, SyntheticSpec};
