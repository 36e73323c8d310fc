//! Shared helpers for integration tests: seeded RNG and independent
//! loop-nest reference implementations to compare the library against.

#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

pub fn rand_vec32(rng: &mut ChaCha8Rng, n: usize, lo: f32, hi: f32) -> Vec<f32> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

pub fn assert_close(got: &[f64], want: &[f64], tol: f64, what: &str) {
    assert_eq!(got.len(), want.len(), "{what}: length mismatch");
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        assert!(
            (g - w).abs() <= tol,
            "{what}: element {i}: got {g}, want {w} (tol {tol})"
        );
    }
}

/// Plain triple-loop matrix product, one (m, k) x (k, n) pair.
pub fn matmul_oracle(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0;
            for p in 0..k {
                acc += a[i * k + p] * b[p * n + j];
            }
            c[i * n + j] = acc;
        }
    }
    c
}

/// Seven-loop 3-D convolution reference over `[B, H, W, L, Cin]` with kernel
/// `[kh, kw, kl, Cin/groups, Cout]`. Padding is given explicitly as the
/// low-side amount per axis; out-of-range taps read zero.
pub fn conv3d_oracle(
    x: &[f64],
    xs: [usize; 5],
    kern: &[f64],
    ks: [usize; 5],
    stride: [usize; 3],
    pad_lo: [usize; 3],
    out: [usize; 3],
    groups: usize,
) -> Vec<f64> {
    let [bs, h, w, l, cin] = xs;
    let [kh, kw, kl, cpg, cout] = ks;
    assert_eq!(cpg, cin / groups);
    let co_per_g = cout / groups;
    let mut y = vec![0.0; bs * out[0] * out[1] * out[2] * cout];
    let mut yi = 0;
    for b in 0..bs {
        for oh in 0..out[0] {
            for ow in 0..out[1] {
                for ol in 0..out[2] {
                    for co in 0..cout {
                        let g = co / co_per_g;
                        let mut acc = 0.0;
                        for dh in 0..kh {
                            for dw in 0..kw {
                                for dl in 0..kl {
                                    for ci in 0..cpg {
                                        let ih = (oh * stride[0] + dh) as isize - pad_lo[0] as isize;
                                        let iw = (ow * stride[1] + dw) as isize - pad_lo[1] as isize;
                                        let il = (ol * stride[2] + dl) as isize - pad_lo[2] as isize;
                                        if ih < 0 || iw < 0 || il < 0 {
                                            continue;
                                        }
                                        let (ih, iw, il) = (ih as usize, iw as usize, il as usize);
                                        if ih >= h || iw >= w || il >= l {
                                            continue;
                                        }
                                        let xi = (((b * h + ih) * w + iw) * l + il) * cin
                                            + g * cpg
                                            + ci;
                                        let ki =
                                            (((dh * kw + dw) * kl + dl) * cpg + ci) * cout + co;
                                        acc += x[xi] * kern[ki];
                                    }
                                }
                            }
                        }
                        y[yi] = acc;
                        yi += 1;
                    }
                }
            }
        }
    }
    y
}

/// Row-wise softmax reference (max-shifted, last axis of length `cols`).
pub fn softmax_oracle(x: &[f64], cols: usize) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for (row, out) in x.chunks(cols).zip(y.chunks_mut(cols)) {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for (o, v) in out.iter_mut().zip(row) {
            *o = (v - m).exp();
            z += *o;
        }
        for o in out.iter_mut() {
            *o /= z;
        }
    }
    y
}

/// Row-wise layer norm reference with biased variance.
pub fn layer_norm_oracle(x: &[f64], cols: usize, gamma: &[f64], beta: &[f64], eps: f64) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for (row, out) in x.chunks(cols).zip(y.chunks_mut(cols)) {
        let mean = row.iter().sum::<f64>() / cols as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
        let inv = 1.0 / (var + eps).sqrt();
        for j in 0..cols {
            out[j] = (row[j] - mean) * inv * gamma[j] + beta[j];
        }
    }
    y
}
