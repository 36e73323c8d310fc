//! Forward-path oracles for the tensor ops: every kernel is compared against
//! an independent loop-nest reference or a hand-computed closed form.

mod common;

use common::*;
use triformer::{Error, Padding, Tape, Tape32, Tensor, Tensor32};

// ── matmul ──────────────────────────────────────────────────────────────

#[test]
fn matmul_identity_left() {
    let mut t: Tape<f64> = Tape::new();
    let i2 = Tensor::from_vec(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    let m = Tensor::from_vec(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let a = t.leaf(&i2).unwrap();
    let b = t.leaf(&m).unwrap();
    let c = t.matmul(a, b).unwrap();
    assert_eq!(t.value(c), &[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(t.shape(c), &[2, 2]);
}

#[test]
fn matmul_permutation_matrices() {
    let mut t: Tape<f64> = Tape::new();
    let id = Tensor::from_vec(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    let swap = Tensor::from_vec(vec![2, 2], vec![0.0, 1.0, 1.0, 0.0]).unwrap();
    let a = t.leaf(&id).unwrap();
    let b = t.leaf(&swap).unwrap();
    let c = t.matmul(a, b).unwrap();
    assert_eq!(t.value(c), &[0.0, 1.0, 1.0, 0.0]);
}

#[test]
fn matmul_matches_triple_loop_exactly() {
    let mut r = rng(7);
    let a = rand_vec(&mut r, 3 * 4, -2.0, 2.0);
    let b = rand_vec(&mut r, 4 * 2, -2.0, 2.0);
    let want = matmul_oracle(&a, &b, 3, 4, 2);

    let mut t: Tape<f64> = Tape::new();
    let av = t.leaf(&Tensor::from_vec(vec![3, 4], a).unwrap()).unwrap();
    let bv = t.leaf(&Tensor::from_vec(vec![4, 2], b).unwrap()).unwrap();
    let cv = t.matmul(av, bv).unwrap();
    assert_eq!(t.shape(cv), &[3, 2]);
    // Same summation order, so the results agree bit for bit.
    assert_eq!(t.value(cv), want.as_slice());
}

#[test]
fn matmul_broadcasts_batch_dims() {
    let mut r = rng(11);
    let a = rand_vec(&mut r, 2 * 3 * 4, -1.0, 1.0);
    let b = rand_vec(&mut r, 4 * 2, -1.0, 1.0);
    let mut t: Tape<f64> = Tape::new();
    let av = t.leaf(&Tensor::from_vec(vec![2, 3, 4], a.clone()).unwrap()).unwrap();
    let bv = t.leaf(&Tensor::from_vec(vec![4, 2], b.clone()).unwrap()).unwrap();
    let cv = t.matmul(av, bv).unwrap();
    assert_eq!(t.shape(cv), &[2, 3, 2]);
    for batch in 0..2 {
        let want = matmul_oracle(&a[batch * 12..][..12], &b, 3, 4, 2);
        assert_eq!(&t.value(cv)[batch * 6..][..6], want.as_slice());
    }

    // Both sides batched, with a broadcast 1.
    let a2 = rand_vec(&mut r, 2 * 1 * 2 * 3, -1.0, 1.0);
    let b2 = rand_vec(&mut r, 1 * 4 * 3 * 2, -1.0, 1.0);
    let a2v = t.leaf(&Tensor::from_vec(vec![2, 1, 2, 3], a2.clone()).unwrap()).unwrap();
    let b2v = t.leaf(&Tensor::from_vec(vec![1, 4, 3, 2], b2.clone()).unwrap()).unwrap();
    let c2 = t.matmul(a2v, b2v).unwrap();
    assert_eq!(t.shape(c2), &[2, 4, 2, 2]);
    for i in 0..2 {
        for j in 0..4 {
            let want = matmul_oracle(&a2[i * 6..][..6], &b2[j * 6..][..6], 2, 3, 2);
            assert_eq!(&t.value(c2)[(i * 4 + j) * 4..][..4], want.as_slice());
        }
    }
}

#[test]
fn matmul_rejects_bad_shapes() {
    let mut t: Tape<f64> = Tape::new();
    let a = t.leaf(&Tensor::zeros(vec![3, 4])).unwrap();
    let b = t.leaf(&Tensor::zeros(vec![3, 2])).unwrap();
    assert!(matches!(t.matmul(a, b), Err(Error::Shape(_))));

    let c = t.leaf(&Tensor::zeros(vec![2, 3, 4])).unwrap();
    let d = t.leaf(&Tensor::zeros(vec![3, 4, 2])).unwrap();
    assert!(matches!(t.matmul(c, d), Err(Error::Shape(_))));
}

// ── softmax ─────────────────────────────────────────────────────────────

#[test]
fn softmax_uniform_rows() {
    let mut t: Tape<f64> = Tape::new();
    let x = t.leaf(&Tensor::from_vec(vec![1, 3], vec![0.0, 0.0, 0.0]).unwrap()).unwrap();
    let y = t.softmax(x).unwrap();
    assert_close(t.value(y), &[1.0 / 3.0; 3], 1e-15, "softmax of zeros");
}

#[test]
fn softmax_is_stable_for_large_inputs() {
    let mut t: Tape<f64> = Tape::new();
    let x = t.leaf(&Tensor::from_vec(vec![1, 2], vec![1000.0, 1000.0]).unwrap()).unwrap();
    let y = t.softmax(x).unwrap();
    assert_eq!(t.value(y), &[0.5, 0.5]);
}

#[test]
fn softmax_quarter_three_quarters() {
    let mut t: Tape<f64> = Tape::new();
    let x = t
        .leaf(&Tensor::from_vec(vec![1, 2], vec![0.0, 3.0f64.ln()]).unwrap())
        .unwrap();
    let y = t.softmax(x).unwrap();
    assert_close(t.value(y), &[0.25, 0.75], 1e-12, "softmax [0, ln 3]");
}

#[test]
fn softmax_rows_sum_to_one_and_shift_invariant() {
    let mut r = rng(3);
    let x = rand_vec(&mut r, 6 * 5, -4.0, 4.0);
    let shifted: Vec<f64> = x.iter().map(|v| v + 123.456).collect();

    let mut t: Tape<f64> = Tape::new();
    let a = t.leaf(&Tensor::from_vec(vec![6, 5], x).unwrap()).unwrap();
    let b = t.leaf(&Tensor::from_vec(vec![6, 5], shifted).unwrap()).unwrap();
    let ya = t.softmax(a).unwrap();
    let yb = t.softmax(b).unwrap();
    for row in t.value(ya).chunks(5) {
        let s: f64 = row.iter().sum();
        assert!((s - 1.0).abs() <= 1e-6, "row sum {s}");
    }
    assert_close(t.value(ya), t.value(yb), 1e-12, "shift invariance");
}

// ── conv3d ──────────────────────────────────────────────────────────────

#[test]
fn conv3d_delta_kernel_is_identity() {
    let mut r = rng(5);
    let x = rand_vec(&mut r, 2 * 3 * 2 * 1, -1.0, 1.0);
    let mut t: Tape<f64> = Tape::new();
    let xv = t.leaf(&Tensor::from_vec(vec![1, 2, 3, 2, 1], x.clone()).unwrap()).unwrap();
    let kv = t.leaf(&Tensor::from_vec(vec![1, 1, 1, 1, 1], vec![1.0]).unwrap()).unwrap();
    let y = t.conv3d(xv, kv, [1, 1, 1], Padding::None, 1).unwrap();
    assert_eq!(t.shape(y), &[1, 2, 3, 2, 1]);
    assert_eq!(t.value(y), x.as_slice());
}

#[test]
fn conv3d_all_ones_counts_taps() {
    let mut t: Tape<f64> = Tape::new();
    let xv = t.leaf(&Tensor::full(vec![1, 3, 3, 3, 1], 1.0).unwrap()).unwrap();
    let kv = t.leaf(&Tensor::full(vec![3, 3, 3, 1, 1], 1.0).unwrap()).unwrap();
    let y = t.conv3d(xv, kv, [1, 1, 1], Padding::None, 1).unwrap();
    assert_eq!(t.shape(y), &[1, 1, 1, 1, 1]);
    assert_eq!(t.value(y), &[27.0]);
}

#[test]
fn conv3d_matches_loop_nest_with_same_padding_and_stride() {
    let mut r = rng(13);
    let xs = [1usize, 5, 5, 4, 2];
    let ks = [3usize, 3, 3, 2, 2];
    let x = rand_vec(&mut r, xs.iter().product(), -1.0, 1.0);
    let k = rand_vec(&mut r, ks.iter().product(), -1.0, 1.0);
    // Hand-derived for stride 2 And 'same' padding: out ceil(n/s), low-side
    // pad gets the smaller half.
    let out = [3usize, 3, 2];
    let pad_lo = [1usize, 1, 0];
    let want = conv3d_oracle(&x, xs, &k, ks, [2, 2, 2], pad_lo, out, 1);

    let mut t: Tape<f64> = Tape::new();
    let xv = t.leaf(&Tensor::from_vec(xs.to_vec(), x).unwrap()).unwrap();
    let kv = t.leaf(&Tensor::from_vec(ks.to_vec(), k).unwrap()).unwrap();
    let y = t.conv3d(xv, kv, [2, 2, 2], Padding::Same, 1).unwrap();
    assert_eq!(t.shape(y), &[1, 3, 3, 2, 2]);
    assert_close(t.value(y), &want, 1e-12, "strided same conv");
}

#[test]
fn conv3d_depthwise_delta_kernels_are_identity() {
    let mut r = rng(17);
    let x = rand_vec(&mut r, 2 * 2 * 2 * 3, -1.0, 1.0);
    let mut t: Tape<f64> = Tape::new();
    let xv = t.leaf(&Tensor::from_vec(vec![1, 2, 2, 2, 3], x.clone()).unwrap()).unwrap();
    let kv = t.leaf(&Tensor::full(vec![1, 1, 1, 1, 3], 1.0).unwrap()).unwrap();
    let y = t.conv3d(xv, kv, [1, 1, 1], Padding::Same, 3).unwrap();
    assert_eq!(t.value(y), x.as_slice());
}

#[test]
fn conv3d_grouped_matches_loop_nest() {
    let mut r = rng(19);
    let xs = [2usize, 3, 3, 3, 4];
    let ks = [3usize, 3, 3, 2, 4];
    let x = rand_vec(&mut r, xs.iter().product(), -1.0, 1.0);
    let k = rand_vec(&mut r, ks.iter().product(), -1.0, 1.0);
    let want = conv3d_oracle(&x, xs, &k, ks, [1, 1, 1], [1, 1, 1], [3, 3, 3], 2);

    let mut t: Tape<f64> = Tape::new();
    let xv = t.leaf(&Tensor::from_vec(xs.to_vec(), x).unwrap()).unwrap();
    let kv = t.leaf(&Tensor::from_vec(ks.to_vec(), k).unwrap()).unwrap();
    let y = t.conv3d(xv, kv, [1, 1, 1], Padding::Same, 2).unwrap();
    assert_close(t.value(y), &want, 1e-12, "grouped conv");
}

#[test]
fn conv3d_rejects_invalid_configs() {
    let mut t: Tape<f64> = Tape::new();
    let x = t.leaf(&Tensor::zeros(vec![1, 2, 2, 2, 4])).unwrap();
    // Kernel larger than the unpadded input.
    let k_big = t.leaf(&Tensor::zeros(vec![3, 3, 3, 4, 2])).unwrap();
    assert!(t.conv3d(x, k_big, [1, 1, 1], Padding::None, 1).is_err());
    // Groups must divide both channel counts.
    let k = t.leaf(&Tensor::zeros(vec![1, 1, 1, 2, 3])).unwrap();
    assert!(t.conv3d(x, k, [1, 1, 1], Padding::Same, 3).is_err());
    // Kernel channel dim must equal Cin/groups.
    let k_bad = t.leaf(&Tensor::zeros(vec![1, 1, 1, 3, 2])).unwrap();
    assert!(t.conv3d(x, k_bad, [1, 1, 1], Padding::Same, 1).is_err());
    // Zero stride.
    let k_ok = t.leaf(&Tensor::zeros(vec![1, 1, 1, 4, 2])).unwrap();
    assert!(t.conv3d(x, k_ok, [0, 1, 1], Padding::Same, 1).is_err());
}

// ── mac accounting ──────────────────────────────────────────────────────

#[test]
fn mac_counter_matches_analytic_formulas() {
    let mut t: Tape<f64> = Tape::new();
    let a = t.leaf(&Tensor::zeros(vec![2, 3, 4])).unwrap();
    let b = t.leaf(&Tensor::zeros(vec![4, 5])).unwrap();
    t.matmul(a, b).unwrap();
    assert_eq!(t.macs(), 2 * 3 * 4 * 5);

    t.reset_macs();
    assert_eq!(t.macs(), 0);

    let x = t.leaf(&Tensor::zeros(vec![1, 5, 5, 4, 2])).unwrap();
    let k = t.leaf(&Tensor::zeros(vec![3, 3, 3, 2, 2])).unwrap();
    t.conv3d(x, k, [2, 2, 2], Padding::Same, 1).unwrap();
    // out 3x3x2, 27 taps, 2 in-channels, 2 out-channels.
    assert_eq!(t.macs(), 3 * 3 * 2 * 27 * 2 * 2);

    // Counters accumulate across ops.
    t.matmul(a, b).unwrap();
    assert_eq!(t.macs(), 3 * 3 * 2 * 27 * 2 * 2 + 2 * 3 * 4 * 5);
}

#[test]
fn elementwise_counters_track_input_sizes() {
    let mut t: Tape<f64> = Tape::new();
    let x = t.leaf(&Tensor::zeros(vec![4, 6])).unwrap();
    let y = t.gelu(x).unwrap();
    t.softmax(y).unwrap();
    t.sum(x).unwrap();
    let counts = t.eltwise_counts();
    assert_eq!(counts.get("gelu"), Some(&24));
    assert_eq!(counts.get("softmax"), Some(&24));
    assert_eq!(counts.get("sum"), Some(&24));
}

// ── layer norm ──────────────────────────────────────────────────────────

#[test]
fn layer_norm_constant_rows_go_to_zero() {
    let mut t: Tape<f64> = Tape::new();
    let x = t.leaf(&Tensor::full(vec![2, 4], 7.0).unwrap()).unwrap();
    let g = t.leaf(&Tensor::full(vec![4], 1.0).unwrap()).unwrap();
    let b = t.leaf(&Tensor::zeros(vec![4])).unwrap();
    let y = t.layer_norm(x, g, b, 1e-5).unwrap();
    assert_eq!(t.value(y), &[0.0; 8]);
}

#[test]
fn layer_norm_unit_variance_row_is_fixed_point() {
    let mut t: Tape<f64> = Tape::new();
    let x = t.leaf(&Tensor::from_vec(vec![1, 2], vec![1.0, -1.0]).unwrap()).unwrap();
    let g = t.leaf(&Tensor::full(vec![2], 1.0).unwrap()).unwrap();
    let b = t.leaf(&Tensor::zeros(vec![2])).unwrap();
    let y = t.layer_norm(x, g, b, 1e-12).unwrap();
    assert_close(t.value(y), &[1.0, -1.0], 1e-9, "layer norm fixed point");
}

#[test]
fn layer_norm_matches_formula() {
    let mut r = rng(23);
    let x = rand_vec(&mut r, 3 * 4, -2.0, 2.0);
    let g = rand_vec(&mut r, 4, 0.5, 1.5);
    let b = rand_vec(&mut r, 4, -0.5, 0.5);
    let want = layer_norm_oracle(&x, 4, &g, &b, 1e-5);

    let mut t: Tape<f64> = Tape::new();
    let xv = t.leaf(&Tensor::from_vec(vec![3, 4], x).unwrap()).unwrap();
    let gv = t.leaf(&Tensor::from_vec(vec![4], g).unwrap()).unwrap();
    let bv = t.leaf(&Tensor::from_vec(vec![4], b).unwrap()).unwrap();
    let y = t.layer_norm(xv, gv, bv, 1e-5).unwrap();
    assert_close(t.value(y), &want, 1e-10, "layer norm");
}

#[test]
fn layer_norm_validates_param_shapes() {
    let mut t: Tape<f64> = Tape::new();
    let x = t.leaf(&Tensor::zeros(vec![3, 4])).unwrap();
    let g = t.leaf(&Tensor::zeros(vec![3])).unwrap();
    let b = t.leaf(&Tensor::zeros(vec![4])).unwrap();
    assert!(matches!(t.layer_norm(x, g, b, 1e-5), Err(Error::Shape(_))));
}

// ── cross entropy ───────────────────────────────────────────────────────

#[test]
fn cross_entropy_uniform_logits_is_log_c() {
    let mut t: Tape<f64> = Tape::new();
    let x = t.leaf(&Tensor::full(vec![2, 4], 0.7).unwrap()).unwrap();
    let loss = t.cross_entropy(x, &[1, 3]).unwrap();
    let got = t.scalar(loss).unwrap();
    assert!((got - 4.0f64.ln()).abs() <= 1e-12, "got {got}");
}

#[test]
fn cross_entropy_rejects_bad_labels() {
    let mut t: Tape<f64> = Tape::new();
    let x = t.leaf(&Tensor::zeros(vec![2, 4])).unwrap();
    assert!(matches!(t.cross_entropy(x, &[0, 4]), Err(Error::Data(_))));
    assert!(t.cross_entropy(x, &[0]).is_err());
}

// ── gelu ────────────────────────────────────────────────────────────────

#[test]
fn gelu_closed_form_points() {
    let mut t: Tape<f64> = Tape::new();
    let x = t
        .leaf(&Tensor::from_vec(vec![4], vec![0.0, 1.0, 20.0, -20.0]).unwrap())
        .unwrap();
    let y = t.gelu(x).unwrap();
    let v = t.value(y);
    assert_eq!(v[0], 0.0);
    // Tanh-form reference evaluated directly.
    let c = (2.0 / std::f64::consts::PI).sqrt();
    let want1 = 0.5 * (1.0 + (c * (1.0 + 0.044715)).tanh());
    assert!((v[1] - want1).abs() <= 1e-12, "gelu(1) = {}", v[1]);
    assert!((v[2] - 20.0).abs() <= 1e-8, "gelu(+20) = {}", v[2]);
    assert!(v[3].abs() <= 1e-8, "gelu(-20) = {}", v[3]);
}

// ── pooling, reshape, permute, crop ─────────────────────────────────────

#[test]
fn global_avg_pool_of_constant_is_constant() {
    let mut t: Tape<f64> = Tape::new();
    let x = t.leaf(&Tensor::full(vec![2, 3, 3, 2, 4], 3.25).unwrap()).unwrap();
    let y = t.global_avg_pool(x).unwrap();
    assert_eq!(t.shape(y), &[2, 4]);
    assert_eq!(t.value(y), &[3.25; 8]);
}

#[test]
fn global_avg_pool_averages_per_channel() {
    let mut r = rng(29);
    let x = rand_vec(&mut r, 2 * 2 * 3 * 2, -1.0, 1.0);
    let mut t: Tape<f64> = Tape::new();
    let xv = t.leaf(&Tensor::from_vec(vec![1, 2, 2, 3, 2], x.clone()).unwrap()).unwrap();
    let y = t.global_avg_pool(xv).unwrap();
    for c in 0..2 {
        let want: f64 = x.iter().skip(c).step_by(2).sum::<f64>() / 12.0;
        assert!((t.value(y)[c] - want).abs() <= 1e-12);
    }
}

#[test]
fn reshape_keeps_data_and_validates_numel() {
    let mut t: Tape<f64> = Tape::new();
    let x = t.leaf(&Tensor::from_vec(vec![2, 6], (0..12).map(|i| i as f64).collect()).unwrap()).unwrap();
    let y = t.reshape(x, vec![3, 4]).unwrap();
    assert_eq!(t.value(y), t.value(x));
    assert!(matches!(t.reshape(x, vec![5, 3]), Err(Error::Shape(_))));
}

#[test]
fn permute_moves_strides() {
    let x: Vec<f64> = (0..24).map(|i| i as f64).collect();
    let mut t: Tape<f64> = Tape::new();
    let xv = t.leaf(&Tensor::from_vec(vec![2, 3, 4], x.clone()).unwrap()).unwrap();
    let y = t.permute(xv, &[2, 0, 1]).unwrap();
    assert_eq!(t.shape(y), &[4, 2, 3]);
    let v = t.value(y);
    for i in 0..2 {
        for j in 0..3 {
            for k in 0..4 {
                assert_eq!(v[(k * 2 + i) * 3 + j], x[(i * 3 + j) * 4 + k]);
            }
        }
    }
    // Inverse permutation restores the original layout.
    let back = t.permute(y, &[1, 2, 0]).unwrap();
    assert_eq!(t.value(back), x.as_slice());
    // Invalid permutations rejected.
    assert!(t.permute(xv, &[0, 0, 1]).is_err());
    assert!(t.permute(xv, &[0, 1]).is_err());
}

#[test]
fn crop_center_takes_the_middle_window() {
    let mut r = rng(31);
    let x = rand_vec(&mut r, 5 * 5 * 4 * 2, -1.0, 1.0);
    let mut t: Tape<f64> = Tape::new();
    let xv = t.leaf(&Tensor::from_vec(vec![1, 5, 5, 4, 2], x.clone()).unwrap()).unwrap();
    let y = t.crop_center(xv, [3, 3, 2]).unwrap();
    assert_eq!(t.shape(y), &[1, 3, 3, 2, 2]);
    let v = t.value(y);
    for h in 0..3 {
        for w in 0..3 {
            for l in 0..2 {
                for c in 0..2 {
                    let src = (((h + 1) * 5 + (w + 1)) * 4 + (l + 1)) * 2 + c;
                    let dst = ((h * 3 + w) * 2 + l) * 2 + c;
                    assert_eq!(v[dst], x[src]);
                }
            }
        }
    }
    // Oversized crop rejected.
    assert!(t.crop_center(xv, [7, 3, 2]).is_err());
    assert!(t.crop_center(xv, [0, 3, 2]).is_err());
}

// ── elementwise and numeric guards ──────────────────────────────────────

#[test]
fn bias_add_broadcasts_rows() {
    let mut t: Tape<f64> = Tape::new();
    let x = t.leaf(&Tensor::from_vec(vec![2, 3], vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap()).unwrap();
    let b = t.leaf(&Tensor::from_vec(vec![3], vec![10.0, 20.0, 30.0]).unwrap()).unwrap();
    let y = t.bias_add(x, b).unwrap();
    assert_eq!(t.value(y), &[10.0, 21.0, 32.0, 13.0, 24.0, 35.0]);
    let bad = t.leaf(&Tensor::zeros(vec![2])).unwrap();
    assert!(matches!(t.bias_add(x, bad), Err(Error::Shape(_))));
}

#[test]
fn add_mul_scale_elementwise() {
    let mut t: Tape<f64> = Tape::new();
    let a = t.leaf(&Tensor::from_vec(vec![3], vec![1.0, 2.0, 3.0]).unwrap()).unwrap();
    let b = t.leaf(&Tensor::from_vec(vec![3], vec![4.0, 5.0, 6.0]).unwrap()).unwrap();
    let s = t.add(a, b).unwrap();
    assert_eq!(t.value(s), &[5.0, 7.0, 9.0]);
    let p = t.mul(a, b).unwrap();
    assert_eq!(t.value(p), &[4.0, 10.0, 18.0]);
    let c = t.scale(a, -1.5).unwrap();
    assert_eq!(t.value(c), &[-1.5, -3.0, -4.5]);
    let bad = t.leaf(&Tensor::zeros(vec![2])).unwrap();
    assert!(matches!(t.add(a, bad), Err(Error::Shape(_))));
    assert!(t.scale(a, f64::INFINITY).is_err());
}

#[test]
fn sum_reduces_to_scalar() {
    let mut t: Tape<f64> = Tape::new();
    let x = t.leaf(&Tensor::from_vec(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap()).unwrap();
    let s = t.sum(x).unwrap();
    assert_eq!(t.scalar(s).unwrap(), 10.0);
    assert!(t.scalar(x).is_err());
}

#[test]
fn non_finite_inputs_are_numeric_errors() {
    assert!(matches!(
        Tensor::<f64>::from_vec(vec![2], vec![1.0, f64::NAN]),
        Err(Error::Numeric(_))
    ));
    // Overflow created mid-graph is caught at the op that produced it.
    let mut t: Tape32 = Tape::new();
    let x = t.leaf(&Tensor32::from_vec(vec![1], vec![3.0e38]).unwrap()).unwrap();
    assert!(matches!(t.add(x, x), Err(Error::Numeric(_))));
}
