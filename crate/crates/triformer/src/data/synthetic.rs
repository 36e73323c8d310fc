//! Seeded two-sensor synthetic scenes for desk-scale transfer experiments.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::hsc::{HsiCube, LabelMap};
use crate::error::{Error, Result};

/// Second-sensor view parameters: which slice of the latent spectrum the
/// sensor sees and how it distorts it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorSpec {
    /// Retained fraction of the latent band range, `0 <= lo < hi <= 1`.
    pub band_lo: f64,
    pub band_hi: f64,
    /// Output band count.
    pub target_bands: usize,
    /// Smooth monotone warp strength in `[0, 1)`.
    pub warp: f64,
    /// Per-band multiplicative jitter amplitude.
    pub gain_jitter: f64,
    /// Per-band additive jitter amplitude.
    pub offset_jitter: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        SensorSpec {
            band_lo: 0.1,
            band_hi: 0.9,
            target_bands: 36,
            warp: 0.3,
            gain_jitter: 0.05,
            offset_jitter: 0.02,
        }
    }
}

/// Scene recipe: classes, extents, endmember/layout roughness, noise, and
/// the second sensor's transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub h: usize,
    pub w: usize,
    /// Latent (sensor A) band count.
    pub bands: usize,
    /// Endmember smoothing window, in bands.
    pub smoothness: usize,
    /// Per-band Gaussian noise std.
    pub sigma: f64,
    /// Number of nearest-seed-point regions; at least `classes`.
    pub regions: usize,
    pub sensor_b: SensorSpec,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            classes: 5,
            h: 64,
            w: 64,
            bands: 48,
            smoothness: 5,
            sigma: 0.05,
            regions: 40,
            sensor_b: SensorSpec::default(),
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::config(format!("need >= 2 classes, got {}", self.classes)));
        }
        if self.h == 0 || self.w == 0 {
            return Err(Error::config("scene extents must be positive"));
        }
        if self.h * self.w < self.regions {
            return Err(Error::config(format!(
                "{} region seeds cannot fit a {}x{} grid",
                self.regions, self.h, self.w
            )));
        }
        if self.bands < 4 {
            return Err(Error::config(format!("need >= 4 latent bands, got {}", self.bands)));
        }
        if self.smoothness == 0 {
            return Err(Error::config("smoothness window must be >= 1"));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::config(format!("noise sigma must be finite and >= 0, got {}", self.sigma)));
        }
        if self.regions < self.classes {
            return Err(Error::config(format!(
                "{} regions cannot cover {} classes",
                self.regions, self.classes
            )));
        }
        let s = &self.sensor_b;
        if !(0.0 <= s.band_lo && s.band_lo < s.band_hi && s.band_hi <= 1.0) {
            return Err(Error::config(format!(
                "band range [{}, {}] must satisfy 0 <= lo < hi <= 1",
                s.band_lo, s.band_hi
            )));
        }
        if s.target_bands < 2 {
            return Err(Error::config("sensor B needs >= 2 bands"));
        }
        if !(0.0..1.0).contains(&s.warp) {
            return Err(Error::config(format!("warp must be in [0, 1), got {}", s.warp)));
        }
        if s.gain_jitter < 0.0 || s.offset_jitter < 0.0 {
            return Err(Error::config("jitter amplitudes must be >= 0"));
        }
        Ok(())
    }
}

/// Concrete band-space mapping from the latent spectrum to sensor B:
/// sampling positions (latent band indices) plus per-band gain/offset.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorTransform {
    pub positions: Vec<f64>,
    pub gain: Vec<f32>,
    pub offset: Vec<f32>,
}

impl SensorTransform {
    /// Applies the transform to one latent spectrum.
    pub fn apply(&self, spectrum: &[f32]) -> Vec<f32> {
        self.positions
            .iter()
            .zip(self.gain.iter().zip(&self.offset))
            .map(|(&p, (&g, &o))| {
                let lo = (p.floor() as usize).min(spectrum.len() - 1);
                let hi = (lo + 1).min(spectrum.len() - 1);
                let t = p - lo as f64;
                let v = spectrum[lo] as f64 + t * (spectrum[hi] as f64 - spectrum[lo] as f64);
                (v * g as f64 + o as f64) as f32
            })
            .collect()
    }
}

/// Two aligned sensor views of the same latent scene.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub sensor_a: (HsiCube, LabelMap),
    pub sensor_b: (HsiCube, LabelMap),
    /// Latent per-class endmember spectra, `classes x bands`.
    pub endmembers: Vec<Vec<f32>>,
    pub transform: SensorTransform,
}

/// Moving-average smoothing with clamped window ends.
fn box_smooth(x: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            x[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// One endmember: a class-specific absorption bump over a smoothed random
/// walk, standardized and lifted to a positive radiance-like level.
fn endmember(bands: usize, class: usize, classes: usize, smoothness: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let noise: Vec<f64> = (0..bands).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let walk: Vec<f64> = box_smooth(&noise, smoothness)
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    let mean = walk.iter().sum::<f64>() / bands as f64;
    let std = (walk.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / bands as f64)
        .sqrt()
        .max(1e-9);

    let center = (class as f64 + 0.5) / classes as f64 * (bands - 1) as f64;
    let width = (bands as f64 / (2.0 * classes as f64)).max(1.0);
    (0..bands)
        .map(|j| {
            let bump = (-((j as f64 - center) / width).powi(2) / 2.0).exp();
            let v = 2.0 + 0.5 * (walk[j] - mean) / std + 1.5 * bump;
            v as f32
        })
        .collect()
}

/// Generates the aligned two-sensor scene. All randomness flows from one
/// seeded stream in a fixed order (endmembers, layout, transform, noise),
/// so outputs are bitwise deterministic per seed.
pub fn gen_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticScene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w, l) = (spec.h, spec.w, spec.bands);

    let endmembers: Vec<Vec<f32>> = (0..spec.classes)
        .map(|c| endmember(l, c, spec.classes, spec.smoothness, &mut rng))
        .collect();

    // Distinct seed cells; round-robin classes so each class owns >= 1 cell.
    let cells = sample(&mut rng, h * w, spec.regions).into_vec();
    let points: Vec<(f64, f64, i32)> = cells
        .iter()
        .enumerate()
        .map(|(i, &cell)| {
            ((cell / w) as f64, (cell % w) as f64, (i % spec.classes) as i32 + 1)
        })
        .collect();
    let labels: Vec<i32> = (0..h * w)
        .map(|cell| {
            let (y, x) = ((cell / w) as f64, (cell % w) as f64);
            points
                .iter()
                .map(|&(py, px, class)| {
                    let d = (py - y) * (py - y) + (px - x) * (px - x);
                    (d, class)
                })
                .min_by(|a, b| a.partial_cmp(b).unwrap())
                .unwrap()
                .1
        })
        .collect();
    let class_names: Vec<String> = (1..=spec.classes).map(|c| format!("class_{c}")).collect();

    // Sensor B band mapping: crop + smooth monotone warp + gain/offset.
    let s = &spec.sensor_b;
    let (lo_idx, hi_idx) = (s.band_lo * (l - 1) as f64, s.band_hi * (l - 1) as f64);
    let positions: Vec<f64> = (0..s.target_bands)
        .map(|j| {
            let t = j as f64 / (s.target_bands - 1) as f64;
            let warped = t + s.warp * (std::f64::consts::TAU * t).sin() / std::f64::consts::TAU;
            (lo_idx + warped * (hi_idx - lo_idx)).clamp(0.0, (l - 1) as f64)
        })
        .collect();
    let gain: Vec<f32> =
        (0..s.target_bands).map(|_| (1.0 + s.gain_jitter * rng.gen_range(-1.0..1.0)) as f32).collect();
    let offset: Vec<f32> =
        (0..s.target_bands).map(|_| (s.offset_jitter * rng.gen_range(-1.0..1.0)) as f32).collect();
    let transform = SensorTransform { positions, gain, offset };

    let fill = |clean: &dyn Fn(i32) -> Vec<f32>, bands: usize, rng: &mut ChaCha8Rng| -> Result<Vec<f32>> {
        let noise = if spec.sigma > 0.0 {
            Some(Normal::new(0.0, spec.sigma).map_err(|e| Error::config(e.to_string()))?)
        } else {
            None
        };
        let mut data = Vec::with_capacity(h * w * bands);
        for &lab in &labels {
            let base = clean(lab);
            match &noise {
                Some(n) => {
                    data.extend(base.iter().map(|&v| (v as f64 + n.sample(rng)) as f32))
                }
                None => data.extend_from_slice(&base),
            }
        }
        Ok(data)
    };

    let wavelengths_a: Vec<f64> =
        (0..l).map(|j| 0.4 + 2.1 * j as f64 / (l - 1) as f64).collect();
    let data_a = fill(&|lab| endmembers[lab as usize - 1].clone(), l, &mut rng)?;
    let cube_a = HsiCube {
        h,
        w,
        l,
        data: data_a,
        wavelengths: Some(wavelengths_a.clone()),
        sensor_tag: "synthetic-a".into(),
    };

    let projected: Vec<Vec<f32>> = endmembers.iter().map(|e| transform.apply(e)).collect();
    let data_b = fill(&|lab| projected[lab as usize - 1].clone(), s.target_bands, &mut rng)?;
    let wavelengths_b: Vec<f64> = transform
        .positions
        .iter()
        .map(|&p| {
            let lo = (p.floor() as usize).min(l - 1);
            let hi = (lo + 1).min(l - 1);
            wavelengths_a[lo] + (p - lo as f64) * (wavelengths_a[hi] - wavelengths_a[lo])
        })
        .collect();
    let cube_b = HsiCube {
        h,
        w,
        l: s.target_bands,
        data: data_b,
        wavelengths: Some(wavelengths_b),
        sensor_tag: "synthetic-b".into(),
    };

    let map = LabelMap { h, w, labels, class_names };
    cube_a.validate()?;
    cube_b.validate()?;
    map.validate()?;
    Ok(SyntheticScene {
        sensor_a: (cube_a, map.clone()),
        sensor_b: (cube_b, map),
        endmembers,
        transform,
    })
}
