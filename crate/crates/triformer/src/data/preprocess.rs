//! Spectral resampling, per-band standardization, and patch extraction.

use crate::data::hsc::HsiCube;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Linearly interpolates every pixel's spectrum onto `target_l` uniform
/// positions spanning the original band-index range. Wavelengths, when
/// present, are resampled the same way.
pub fn spectral_resample(cube: &HsiCube, target_l: usize) -> Result<HsiCube> {
    if target_l < 2 {
        return Err(Error::config(format!("target band count must be >= 2, got {target_l}")));
    }
    cube.validate()?;
    let l = cube.l;
    // Source position of each output band, exact at the endpoints.
    let positions: Vec<f64> = (0..target_l)
        .map(|j| (j * (l - 1)) as f64 / (target_l - 1) as f64)
        .collect();
    let mut samples = Vec::with_capacity(positions.len());
    for &p in &positions {
        let lo = (p.floor() as usize).min(l - 1);
        let hi = (lo + 1).min(l - 1);
        samples.push((lo, hi, p - lo as f64));
    }

    let mut data = Vec::with_capacity(cube.h * cube.w * target_l);
    for px in cube.data.chunks_exact(l) {
        for &(lo, hi, t) in &samples {
            let v = px[lo] as f64 + t * (px[hi] as f64 - px[lo] as f64);
            data.push(v as f32);
        }
    }
    let wavelengths = cube.wavelengths.as_ref().map(|wl| {
        samples.iter().map(|&(lo, hi, t)| wl[lo] + t * (wl[hi] - wl[lo])).collect()
    });
    Ok(HsiCube {
        h: cube.h,
        w: cube.w,
        l: target_l,
        data,
        wavelengths,
        sensor_tag: cube.sensor_tag.clone(),
    })
}

/// Standardizes each band to mean 0 / std 1 over the whole cube, with a
/// `1e-6` floor on the std. Idempotent up to rounding.
pub fn normalize(cube: &HsiCube) -> Result<HsiCube> {
    cube.validate()?;
    let (l, pixels) = (cube.l, cube.h * cube.w);
    let mut mean = vec![0f64; l];
    for px in cube.data.chunks_exact(l) {
        for (m, &v) in mean.iter_mut().zip(px) {
            *m += v as f64;
        }
    }
    for m in &mut mean {
        *m /= pixels as f64;
    }
    let mut var = vec![0f64; l];
    for px in cube.data.chunks_exact(l) {
        for (b, &v) in px.iter().enumerate() {
            let d = v as f64 - mean[b];
            var[b] += d * d;
        }
    }
    let scale: Vec<f64> =
        var.iter().map(|&v| 1.0 / (v / pixels as f64).sqrt().max(1e-6)).collect();

    let mut data = Vec::with_capacity(cube.data.len());
    for px in cube.data.chunks_exact(l) {
        for (b, &v) in px.iter().enumerate() {
            data.push(((v as f64 - mean[b]) * scale[b]) as f32);
        }
    }
    Ok(HsiCube { data, ..cube.clone() })
}

/// Mirror index for reflection padding without edge duplication.
fn reflect(p: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut p = p.rem_euclid(period);
    if p >= n as isize {
        p = period - p;
    }
    p as usize
}

/// Extracts the odd-sized spatial patch centered on `(y, x)` as a
/// `[size, size, L, 1]` tensor; off-grid rows/columns are mirror-padded.
pub fn extract_patch(cube: &HsiCube, y: usize, x: usize, size: usize) -> Result<Tensor<f32>> {
    if size % 2 == 0 || size == 0 {
        return Err(Error::config(format!("patch size must be odd, got {size}")));
    }
    if y >= cube.h || x >= cube.w {
        return Err(Error::data(format!(
            "pixel ({y}, {x}) outside {}x{} grid",
            cube.h, cube.w
        )));
    }
    let half = (size / 2) as isize;
    let mut out = Vec::with_capacity(size * size * cube.l);
    for r in 0..size as isize {
        let sy = reflect(y as isize + r - half, cube.h);
        for c in 0..size as isize {
            let sx = reflect(x as isize + c - half, cube.w);
            out.extend_from_slice(cube.pixel(sy, sx));
        }
    }
    Tensor::from_vec(vec![size, size, cube.l, 1], out)
}
