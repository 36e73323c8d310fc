//! Preprocessing, splitting, patch extraction, and synthetic scenes.

mod common;

use std::collections::BTreeSet;

use common::{assert_close, rand_vec32, rng};
use triformer::data::{
    extract_patch, gen_synthetic, normalize, rgb_to_pseudo_hsi, spectral_resample,
    split_per_class, HsiCube, LabelMap, SensorSpec, SplitSpec, SyntheticSpec, PSEUDO_BANDS,
};
use triformer::{Error, Tensor};

fn random_cube(h: usize, w: usize, l: usize, seed: u64) -> HsiCube {
    let mut r = rng(seed);
    HsiCube::new(h, w, l, rand_vec32(&mut r, h * w * l, -2.0, 5.0)).unwrap()
}

// ── spectral_resample ───────────────────────────────────────────────────

#[test]
fn resample_to_same_band_count_is_identity() {
    let cube = random_cube(3, 4, 7, 21);
    let out = spectral_resample(&cube, 7).unwrap();
    for (a, b) in out.data.iter().zip(&cube.data) {
        assert!((a - b).abs() <= 1e-7, "{a} vs {b}");
    }
}

#[test]
fn resample_preserves_linear_ramps_and_endpoints() {
    let l = 5;
    let data: Vec<f32> = (0..2 * 2 * l).map(|i| (i % l) as f32 * 1.5 - 2.0).collect();
    let cube = HsiCube::new(2, 2, l, data).unwrap();
    let out = spectral_resample(&cube, 9).unwrap();
    for px in out.data.chunks_exact(9) {
        for (j, &v) in px.iter().enumerate() {
            let want = j as f32 / 8.0 * (l - 1) as f32 * 1.5 - 2.0;
            assert!((v - want).abs() < 1e-6, "band {j}: {v} vs {want}");
        }
        assert_eq!(px[0], -2.0);
        assert_eq!(px[8], (l - 1) as f32 * 1.5 - 2.0);
    }
}

#[test]
fn resample_matches_hand_interpolation() {
    let cube = HsiCube::new(1, 1, 4, vec![0.0, 1.0, 4.0, 9.0]).unwrap();
    let out = spectral_resample(&cube, 7).unwrap();
    let want = [0.0, 0.5, 1.0, 2.5, 4.0, 6.5, 9.0];
    assert_close(
        &out.data.iter().map(|&v| v as f64).collect::<Vec<_>>(),
        &want,
        1e-12,
        "interpolated spectrum",
    );
}

#[test]
fn resample_stays_within_per_pixel_bounds() {
    let cube = random_cube(4, 3, 11, 22);
    for target in [2, 5, 23] {
        let out = spectral_resample(&cube, target).unwrap();
        for (src, dst) in cube.data.chunks_exact(11).zip(out.data.chunks_exact(target)) {
            let (lo, hi) = src.iter().fold((f32::MAX, f32::MIN), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
            for &v in dst {
                assert!(v >= lo && v <= hi, "{v} outside [{lo}, {hi}]");
            }
        }
    }
}

#[test]
fn resample_keeps_constants_and_wavelength_order() {
    let mut cube = HsiCube::new(2, 2, 6, vec![3.25; 24]).unwrap();
    cube.wavelengths = Some(vec![0.4, 0.45, 0.6, 0.9, 1.7, 2.5]);
    let out = spectral_resample(&cube, 13).unwrap();
    assert!(out.data.iter().all(|&v| v == 3.25));
    let wl = out.wavelengths.unwrap();
    assert_eq!(wl.len(), 13);
    assert_eq!(wl[0], 0.4);
    assert_eq!(wl[12], 2.5);
    assert!(wl.windows(2).all(|p| p[1] > p[0]));
    assert!(matches!(spectral_resample(&cube, 1), Err(Error::Config(_))));
}

// ── normalize ───────────────────────────────────────────────────────────

#[test]
fn normalize_zeroes_constant_bands_and_standardizes() {
    let mut cube = random_cube(6, 5, 4, 23);
    for px in cube.data.chunks_exact_mut(4) {
        px[2] = 42.0;
    }
    let out = normalize(&cube).unwrap();
    let pixels = (cube.h * cube.w) as f64;
    for band in 0..4 {
        let vals: Vec<f64> =
            out.data.iter().skip(band).step_by(4).map(|&v| v as f64).collect();
        let mean = vals.iter().sum::<f64>() / pixels;
        let std = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / pixels).sqrt();
        assert!(mean.abs() < 1e-5, "band {band} mean {mean}");
        if band == 2 {
            assert!(vals.iter().all(|&v| v == 0.0), "constant band must zero out");
        } else {
            assert!((std - 1.0).abs() < 1e-4, "band {band} std {std}");
        }
    }
}

#[test]
fn normalize_is_idempotent() {
    let cube = random_cube(5, 5, 3, 24);
    let once = normalize(&cube).unwrap();
    let twice = normalize(&once).unwrap();
    for (a, b) in twice.data.iter().zip(&once.data) {
        assert!((a - b).abs() < 1e-5, "{a} vs {b}");
    }
}

// ── split_per_class ─────────────────────────────────────────────────────

fn toy_labels() -> LabelMap {
    // 30 of class 1, 20 of class 2, 10 of class 3, 12 unlabeled.
    let mut labels = vec![0i32; 72];
    for (i, lab) in labels.iter_mut().enumerate() {
        *lab = match i {
            0..=29 => 1,
            30..=49 => 2,
            50..=59 => 3,
            _ => 0,
        };
    }
    LabelMap::new(8, 9, labels, vec!["a".into(), "b".into(), "c".into()]).unwrap()
}

#[test]
fn split_counts_disjointness_and_determinism() {
    let labels = toy_labels();
    let spec = SplitSpec::fixed(5, 99);
    let split = split_per_class(&labels, &spec).unwrap();
    assert_eq!(split.train.len(), 15);
    assert_eq!(split.test.len(), 30 + 20 + 10 - 15);

    let train: BTreeSet<_> = split.train.iter().copied().collect();
    let test: BTreeSet<_> = split.test.iter().copied().collect();
    assert!(train.is_disjoint(&test));
    assert!(train.iter().all(|&i| labels.labels[i] > 0));
    assert!(test.iter().all(|&i| labels.labels[i] > 0));
    assert_eq!(train.len() + test.len(), 60);
    for class in 1..=3 {
        let n = split.train.iter().filter(|&&i| labels.labels[i] == class).count();
        assert_eq!(n, 5, "class {class}");
    }

    assert_eq!(split_per_class(&labels, &spec).unwrap(), split);
    assert_ne!(split_per_class(&labels, &SplitSpec::fixed(5, 100)).unwrap(), split);
}

#[test]
fn split_boundary_and_failure_cases() {
    let labels = toy_labels();
    // Class 3 has 10 pixels: n=9 leaves exactly one test pixel.
    let split = split_per_class(&labels, &SplitSpec::fixed(9, 1)).unwrap();
    let class3_test: Vec<_> =
        split.test.iter().filter(|&&i| labels.labels[i] == 3).collect();
    assert_eq!(class3_test.len(), 1);

    // n=10 would leave class 3 with no test pixels.
    let err = split_per_class(&labels, &SplitSpec::fixed(10, 1)).unwrap_err();
    match err {
        Error::Data(msg) => {
            assert!(msg.contains("class 3") && msg.contains("10"), "{msg}");
        }
        other => panic!("expected a data error, got {other}"),
    }
    assert!(matches!(
        split_per_class(&labels, &SplitSpec::fixed(0, 1)),
        Err(Error::Config(_))
    ));
}

#[test]
fn split_overrides_and_preset() {
    let labels = toy_labels();
    let mut spec = SplitSpec::fixed(8, 7);
    spec.overrides.insert(3, 2);
    let split = split_per_class(&labels, &spec).unwrap();
    for (class, want) in [(1, 8), (2, 8), (3, 2)] {
        let n = split.train.iter().filter(|&&i| labels.labels[i] == class).count();
        assert_eq!(n, want, "class {class}");
    }

    let preset = SplitSpec::indian_pines(0);
    assert_eq!(preset.per_class, 150);
    for class in [1, 5, 7, 9, 15, 16] {
        assert_eq!(preset.overrides.get(&class), Some(&10));
    }
    assert_eq!(preset.overrides.len(), 6);
}

// ── extract_patch ───────────────────────────────────────────────────────

#[test]
fn interior_patch_equals_direct_crop() {
    let cube = random_cube(7, 8, 3, 25);
    let patch = extract_patch(&cube, 3, 4, 5).unwrap();
    assert_eq!(patch.shape(), &[5, 5, 3, 1]);
    for r in 0..5 {
        for c in 0..5 {
            let want = cube.pixel(3 + r - 2, 4 + c - 2);
            let got = &patch.data()[(r * 5 + c) * 3..][..3];
            assert_eq!(got, want, "offset ({r}, {c})");
        }
    }
}

#[test]
fn corner_patch_mirrors_without_duplicating_edges() {
    let cube = random_cube(3, 3, 2, 26);
    let patch = extract_patch(&cube, 0, 0, 3).unwrap();
    // Offsets -1 reflect to row/col 1 (no edge duplication).
    let want_coords = [
        [(1, 1), (1, 0), (1, 1)],
        [(0, 1), (0, 0), (0, 1)],
        [(1, 1), (1, 0), (1, 1)],
    ];
    for r in 0..3 {
        for c in 0..3 {
            let (sy, sx) = want_coords[r][c];
            let got = &patch.data()[(r * 3 + c) * 2..][..2];
            assert_eq!(got, cube.pixel(sy, sx), "offset ({r}, {c})");
        }
    }
}

#[test]
fn concentric_patches_nest_exactly() {
    let cube = random_cube(10, 8, 3, 27);
    for (y, x) in [(4, 4), (0, 7), (9, 0)] {
        let small = extract_patch(&cube, y, x, 13).unwrap();
        let large = extract_patch(&cube, y, x, 27).unwrap();
        for r in 0..13 {
            for c in 0..13 {
                let s = &small.data()[(r * 13 + c) * 3..][..3];
                let l = &large.data()[((r + 7) * 27 + (c + 7)) * 3..][..3];
                assert_eq!(s, l, "pixel ({y}, {x}) offset ({r}, {c})");
            }
        }
    }
}

#[test]
fn patch_rejects_even_sizes_and_off_grid_pixels() {
    let cube = random_cube(4, 4, 2, 28);
    assert!(matches!(extract_patch(&cube, 1, 1, 4), Err(Error::Config(_))));
    assert!(matches!(extract_patch(&cube, 4, 0, 3), Err(Error::Data(_))));
}

#[test]
fn single_row_cube_patches_are_well_defined() {
    let cube = random_cube(1, 5, 2, 29);
    let patch = extract_patch(&cube, 0, 2, 3).unwrap();
    // Height 1: every mirrored row is row 0.
    for r in 0..3 {
        assert_eq!(&patch.data()[(r * 3) * 2..][..2], cube.pixel(0, 1), "row {r}");
    }
}

// ── gen_synthetic ───────────────────────────────────────────────────────

fn small_spec(sigma: f64) -> SyntheticSpec {
    SyntheticSpec {
        classes: 3,
        h: 16,
        w: 16,
        bands: 16,
        smoothness: 3,
        sigma,
        regions: 8,
        sensor_b: SensorSpec { target_bands: 12, ..SensorSpec::default() },
    }
}

#[test]
fn noiseless_scene_pixels_equal_endmembers_exactly() {
    let scene = gen_synthetic(&small_spec(0.0), 5).unwrap();
    let (cube_a, map) = &scene.sensor_a;
    let (cube_b, map_b) = &scene.sensor_b;
    assert_eq!(map, map_b);

    let seen: BTreeSet<i32> = map.labels.iter().copied().collect();
    assert_eq!(seen, (1..=3).collect());

    for (i, &lab) in map.labels.iter().enumerate() {
        let e = &scene.endmembers[lab as usize - 1];
        assert_eq!(cube_a.data[i * 16..(i + 1) * 16], e[..], "sensor A pixel {i}");
        let projected = scene.transform.apply(e);
        assert_eq!(
            cube_b.data[i * 12..(i + 1) * 12],
            projected[..],
            "sensor B pixel {i}"
        );
    }
}

#[test]
fn synthetic_scene_is_seed_deterministic_and_seed_sensitive() {
    let spec = small_spec(0.1);
    let a = gen_synthetic(&spec, 9).unwrap();
    let b = gen_synthetic(&spec, 9).unwrap();
    assert_eq!(a.sensor_a.0.data, b.sensor_a.0.data);
    assert_eq!(a.sensor_b.0.data, b.sensor_b.0.data);
    assert_eq!(a.sensor_a.1, b.sensor_a.1);

    let c = gen_synthetic(&spec, 10).unwrap();
    assert_ne!(a.sensor_a.0.data, c.sensor_a.0.data);
    assert_ne!(a.sensor_a.1.labels, c.sensor_a.1.labels);
}

#[test]
fn synthetic_views_are_distinct_but_aligned() {
    let scene = gen_synthetic(&small_spec(0.05), 3).unwrap();
    let (a, map_a) = &scene.sensor_a;
    let (b, map_b) = &scene.sensor_b;
    assert_eq!(a.l, 16);
    assert_eq!(b.l, 12);
    assert_eq!(map_a.labels, map_b.labels);
    assert_eq!(a.sensor_tag, "synthetic-a");
    assert_eq!(b.sensor_tag, "synthetic-b");
    let wa = a.wavelengths.as_ref().unwrap();
    let wb = b.wavelengths.as_ref().unwrap();
    assert!(wa.windows(2).all(|p| p[1] > p[0]));
    assert!(wb.windows(2).all(|p| p[1] > p[0]));
    // Sensor B sees a cropped sub-range of A's spectrum.
    assert!(wb[0] >= wa[0] && *wb.last().unwrap() <= *wa.last().unwrap());
}

#[test]
fn synthetic_spec_validation() {
    let base = small_spec(0.0);
    let cases = [
        SyntheticSpec { classes: 1, ..base.clone() },
        SyntheticSpec { regions: 2, ..base.clone() },
        SyntheticSpec { sigma: -0.5, ..base.clone() },
        SyntheticSpec { bands: 3, ..base.clone() },
        SyntheticSpec {
            sensor_b: SensorSpec { warp: 1.0, ..base.sensor_b.clone() },
            ..base.clone()
        },
        SyntheticSpec {
            sensor_b: SensorSpec { band_lo: 0.9, band_hi: 0.2, ..base.sensor_b.clone() },
            ..base.clone()
        },
    ];
    for (i, spec) in cases.iter().enumerate() {
        assert!(
            matches!(gen_synthetic(spec, 0), Err(Error::Config(_))),
            "case {i} should fail validation"
        );
    }
}

// ── rgb_to_pseudo_hsi ───────────────────────────────────────────────────

#[test]
fn pseudo_hsi_black_gray_and_shape() {
    let black = Tensor::<f32>::zeros(vec![2, 3, 3]);
    let cube = rgb_to_pseudo_hsi(&black).unwrap();
    assert_eq!(cube.l, PSEUDO_BANDS);
    assert_eq!((cube.h, cube.w), (2, 3));
    assert!(cube.data.iter().all(|&v| v == 0.0));
    let wl = cube.wavelengths.as_ref().unwrap();
    assert_eq!(wl.len(), 32);
    assert_eq!(wl[0], 0.4);
    assert_eq!(wl[31], 0.7);

    let v = 0.37f32;
    let gray = Tensor::full(vec![2, 2, 3], v).unwrap();
    let cube = rgb_to_pseudo_hsi(&gray).unwrap();
    for &b in &cube.data {
        assert!((b - v).abs() < 1e-6, "gray band {b} vs {v}");
    }
}

#[test]
fn pseudo_hsi_rejects_bad_inputs() {
    let wrong_shape = Tensor::<f32>::zeros(vec![2, 2, 4]);
    assert!(matches!(rgb_to_pseudo_hsi(&wrong_shape), Err(Error::Shape(_))));

    let mut over = vec![0.5f32; 12];
    over[5] = 1.5;
    let t = Tensor::from_vec(vec![2, 2, 3], over).unwrap();
    assert!(matches!(rgb_to_pseudo_hsi(&t), Err(Error::Data(_))));

    let mut neg = vec![0.5f32; 12];
    neg[0] = -0.01;
    let t = Tensor::from_vec(vec![2, 2, 3], neg).unwrap();
    assert!(matches!(rgb_to_pseudo_hsi(&t), Err(Error::Data(_))));
}
