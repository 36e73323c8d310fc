//! Deterministic RGB → 32-band pseudo-HSI stub.

use crate::data::hsc::HsiCube;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const PSEUDO_BANDS: usize = 32;

/// Nominal RGB primary centers and response width, micrometers.
const CENTERS: [f64; 3] = [0.610, 0.540, 0.465];
const SIGMA: f64 = 0.05;

/// Band-center wavelengths spanning 0.4–0.7 µm.
fn band_centers() -> Vec<f64> {
    (0..PSEUDO_BANDS)
        .map(|b| 0.4 + 0.3 * b as f64 / (PSEUDO_BANDS - 1) as f64)
        .collect()
}

/// Per-band RGB mixing weights: Gaussian responses around each primary,
/// normalized to sum to one per band (so gray stays gray).
fn band_weights() -> Vec<[f64; 3]> {
    band_centers()
        .iter()
        .map(|&lam| {
            let raw: Vec<f64> = CENTERS
                .iter()
                .map(|&c| (-((lam - c) / SIGMA).powi(2) / 2.0).exp())
                .collect();
            let total: f64 = raw.iter().sum();
            [raw[0] / total, raw[1] / total, raw[2] / total]
        })
        .collect()
}

/// Expands an `[H, W, 3]` RGB image in `[0, 1]` into a 32-band cube where
/// each band is a fixed Gaussian-weighted blend of the three channels.
pub fn rgb_to_pseudo_hsi(rgb: &Tensor<f32>) -> Result<HsiCube> {
    let (h, w) = match rgb.shape() {
        [h, w, 3] => (*h, *w),
        other => {
            return Err(Error::shape(format!("expected an [H, W, 3] image, got {other:?}")))
        }
    };
    if let Some(i) = rgb.data().iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::data(format!(
            "RGB value {} at flat index {i} outside [0, 1]",
            rgb.data()[i]
        )));
    }
    let weights = band_weights();
    let mut data = Vec::with_capacity(h * w * PSEUDO_BANDS);
    for px in rgb.data().chunks_exact(3) {
        for wts in &weights {
            let v = wts[0] * px[0] as f64 + wts[1] * px[1] as f64 + wts[2] * px[2] as f64;
            data.push(v as f32);
        }
    }
    Ok(HsiCube {
        h,
        w,
        l: PSEUDO_BANDS,
        data,
        wavelengths: Some(band_centers()),
        sensor_tag: "pseudo-rgb".into(),
    })
}
