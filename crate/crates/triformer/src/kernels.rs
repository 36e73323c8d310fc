//! Raw numeric kernels behind the tape ops.
//!
//! Everything here works on flat slices plus explicit extents; the tape layer
//! owns validation, recording and gradient bookkeeping. Inner loops keep the
//! contiguous trailing axis (columns / channels) innermost so they vectorize.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::strides_of;

// ── Batched matmul ──────────────────────────────────────────────────────────

/// Geometry of a batched matrix product, resolved once at record time.
///
/// `a` is `[..batch_a, m, k]`, `b` is `[..batch_b, k, n]`; batch dims
/// broadcast right-aligned (a missing or size-1 dim repeats its operand).
/// `a_strides`/`b_strides` give the element stride of each output batch dim
/// into the operand, with 0 marking a broadcast dim.
#[derive(Debug, Clone)]
pub struct MatDims {
    pub batch: Vec<usize>,
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub a_strides: Vec<usize>,
    pub b_strides: Vec<usize>,
}

impl MatDims {
    pub fn resolve(a_shape: &[usize], b_shape: &[usize]) -> Result<Self> {
        if a_shape.len() < 2 || b_shape.len() < 2 {
            return Err(Error::shape(format!(
                "matmul operands need at least 2 dims, got {a_shape:?} and {b_shape:?}"
            )));
        }
        let (m, ka) = (a_shape[a_shape.len() - 2], a_shape[a_shape.len() - 1]);
        let (kb, n) = (b_shape[b_shape.len() - 2], b_shape[b_shape.len() - 1]);
        if ka != kb {
            return Err(Error::shape(format!(
                "matmul inner dims differ: {a_shape:?} x {b_shape:?}"
            )));
        }
        let ba = &a_shape[..a_shape.len() - 2];
        let bb = &b_shape[..b_shape.len() - 2];
        let ndim = ba.len().max(bb.len());
        let mut batch = vec![0; ndim];
        for d in 0..ndim {
            let da = if d + ba.len() >= ndim { ba[d + ba.len() - ndim] } else { 1 };
            let db = if d + bb.len() >= ndim { bb[d + bb.len() - ndim] } else { 1 };
            if da != db && da != 1 && db != 1 {
                return Err(Error::shape(format!(
                    "matmul batch dims incompatible: {a_shape:?} x {b_shape:?}"
                )));
            }
            batch[d] = da.max(db);
        }
        let full_a = strides_of(ba);
        let full_b = strides_of(bb);
        let mut a_strides = vec![0; ndim];
        let mut b_strides = vec![0; ndim];
        for d in 0..ndim {
            if d + ba.len() >= ndim {
                let i = d + ba.len() - ndim;
                if ba[i] == batch[d] {
                    a_strides[d] = full_a[i] * m * ka;
                }
            }
            if d + bb.len() >= ndim {
                let i = d + bb.len() - ndim;
                if bb[i] == batch[d] {
                    b_strides[d] = full_b[i] * kb * n;
                }
            }
        }
        Ok(MatDims { batch, m, k: ka, n, a_strides, b_strides })
    }

    pub fn out_shape(&self) -> Vec<usize> {
        let mut s = self.batch.clone();
        s.push(self.m);
        s.push(self.n);
        s
    }

    pub fn batch_items(&self) -> usize {
        self.batch.iter().product()
    }

    pub fn macs(&self) -> u64 {
        self.batch_items() as u64 * self.m as u64 * self.k as u64 * self.n as u64
    }

    /// Flat (a, b) panel offsets for every output batch item, in output order.
    fn panel_offsets(&self) -> Vec<(usize, usize)> {
        let total = self.batch_items();
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; self.batch.len()];
        for _ in 0..total {
            let mut ao = 0;
            let mut bo = 0;
            for (d, &i) in idx.iter().enumerate() {
                ao += i * self.a_strides[d];
                bo += i * self.b_strides[d];
            }
            out.push((ao, bo));
            for d in (0..idx.len()).rev() {
                idx[d] += 1;
                if idx[d] < self.batch[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        out
    }
}

/// `c[m,n] += a[m,k] * b[k,n]` on zeroed or accumulating output.
#[inline]
fn gemm_acc<T: Scalar>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        let arow = &a[i * k..(i + 1) * k];
        for (kk, &aik) in arow.iter().enumerate() {
            let brow = &b[kk * n..(kk + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += aik * bv;
            }
        }
    }
}

#[inline]
fn transpose<T: Scalar>(src: &[T], rows: usize, cols: usize, dst: &mut Vec<T>) {
    dst.clear();
    dst.resize(rows * cols, T::zero());
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}

pub fn matmul_forward<T: Scalar>(a: &[T], b: &[T], dims: &MatDims) -> Vec<T> {
    let (m, k, n) = (dims.m, dims.k, dims.n);
    let mut out = vec![T::zero(); dims.batch_items() * m * n];
    for (item, (ao, bo)) in dims.panel_offsets().into_iter().enumerate() {
        gemm_acc(
            &a[ao..ao + m * k],
            &b[bo..bo + k * n],
            &mut out[item * m * n..(item + 1) * m * n],
            m,
            k,
            n,
        );
    }
    out
}

/// Accumulates `da += dc . b^T` and `db += a^T . dc` panel by panel.
/// Either gradient may be `None` when that operand does not require one.
pub fn matmul_backward<T: Scalar>(
    a: &[T],
    b: &[T],
    dc: &[T],
    dims: &MatDims,
    mut da: Option<&mut [T]>,
    mut db: Option<&mut [T]>,
) {
    let (m, k, n) = (dims.m, dims.k, dims.n);
    let b_shared = dims.b_strides.iter().all(|&s| s == 0);
    let mut bt = Vec::new();
    if b_shared && da.is_some() {
        transpose(&b[..k * n], k, n, &mut bt);
    }
    let mut at = Vec::new();
    let mut bt_local = Vec::new();
    for (item, (ao, bo)) in dims.panel_offsets().into_iter().enumerate() {
        let dpanel = &dc[item * m * n..(item + 1) * m * n];
        if let Some(da) = da.as_deref_mut() {
            let btp: &[T] = if b_shared {
                &bt
            } else {
                transpose(&b[bo..bo + k * n], k, n, &mut bt_local);
                &bt_local
            };
            gemm_acc(dpanel, btp, &mut da[ao..ao + m * k], m, n, k);
        }
        if let Some(db) = db.as_deref_mut() {
            transpose(&a[ao..ao + m * k], m, k, &mut at);
            gemm_acc(&at, dpanel, &mut db[bo..bo + k * n], k, m, n);
        }
    }
}

// ── 3-D convolution ─────────────────────────────────────────────────────────

/// Padding policy for `conv3d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Zero padding with output extent `ceil(n / stride)`; when the total pad
    /// is odd the extra sample goes at the high end.
    Same,
    /// No padding; output extent `(n - k) / stride + 1`.
    None,
}

/// Geometry of one 3-D convolution, resolved at record time.
///
/// Input is `[B, H, W, L, Cin]`, kernel `[kh, kw, kl, Cin/groups, Cout]`,
/// output `[B, Ho, Wo, Lo, Cout]`. Semantics are cross-correlation (no kernel
/// flip).
#[derive(Debug, Clone)]
pub struct ConvMeta {
    pub batch: usize,
    pub in_dims: [usize; 3],
    pub cin: usize,
    pub kdims: [usize; 3],
    pub cout: usize,
    pub stride: [usize; 3],
    pub pad_lo: [usize; 3],
    pub out_dims: [usize; 3],
    pub groups: usize,
}

impl ConvMeta {
    pub fn resolve(
        x_shape: &[usize],
        k_shape: &[usize],
        stride: [usize; 3],
        padding: Padding,
        groups: usize,
    ) -> Result<Self> {
        if x_shape.len() != 5 {
            return Err(Error::shape(format!("conv3d input must be 5-D, got {x_shape:?}")));
        }
        if k_shape.len() != 5 {
            return Err(Error::shape(format!("conv3d kernel must be 5-D, got {k_shape:?}")));
        }
        if stride.iter().any(|&s| s == 0) {
            return Err(Error::config(format!("conv3d stride must be positive, got {stride:?}")));
        }
        let (batch, cin) = (x_shape[0], x_shape[4]);
        let in_dims = [x_shape[1], x_shape[2], x_shape[3]];
        let kdims = [k_shape[0], k_shape[1], k_shape[2]];
        let cout = k_shape[4];
        if groups == 0 || cin % groups != 0 || cout % groups != 0 {
            return Err(Error::config(format!(
                "conv3d groups {groups} must divide cin {cin} and cout {cout}"
            )));
        }
        if k_shape[3] != cin / groups {
            return Err(Error::shape(format!(
                "conv3d kernel channel dim {} != cin/groups {}",
                k_shape[3],
                cin / groups
            )));
        }
        let mut out_dims = [0; 3];
        let mut pad_lo = [0; 3];
        for d in 0..3 {
            match padding {
                Padding::Same => {
                    let out = in_dims[d].div_ceil(stride[d]);
                    let needed =
                        ((out - 1) * stride[d] + kdims[d]).saturating_sub(in_dims[d]);
                    if kdims[d] > in_dims[d] + needed {
                        return Err(Error::shape(format!(
                            "conv3d kernel extent {} exceeds padded input {}",
                            kdims[d],
                            in_dims[d] + needed
                        )));
                    }
                    out_dims[d] = out;
                    pad_lo[d] = needed / 2;
                }
                Padding::None => {
                    if kdims[d] > in_dims[d] {
                        return Err(Error::shape(format!(
                            "conv3d kernel extent {} exceeds input extent {} (no padding)",
                            kdims[d], in_dims[d]
                        )));
                    }
                    out_dims[d] = (in_dims[d] - kdims[d]) / stride[d] + 1;
                    pad_lo[d] = 0;
                }
            }
        }
        Ok(ConvMeta { batch, in_dims, cin, kdims, cout, stride, pad_lo, out_dims, groups })
    }

    pub fn out_shape(&self) -> Vec<usize> {
        vec![self.batch, self.out_dims[0], self.out_dims[1], self.out_dims[2], self.cout]
    }

    /// Multiply-accumulate count: output volume x kernel taps x Cin/groups x Cout.
    pub fn macs(&self) -> u64 {
        let out_vol = self.batch as u64
            * self.out_dims.iter().map(|&d| d as u64).product::<u64>();
        let taps = self.kdims.iter().map(|&d| d as u64).product::<u64>();
        out_vol * taps * (self.cin / self.groups) as u64 * self.cout as u64
    }

    fn is_depthwise(&self) -> bool {
        self.groups == self.cin && self.cin == self.cout
    }
}

/// Iterates output positions and valid kernel taps, calling `f` with the
/// flat input row offset, flat output row offset, and flat tap index.
#[inline]
fn conv_positions<F: FnMut(usize, usize, usize)>(meta: &ConvMeta, mut f: F) {
    let [h, w, l] = meta.in_dims;
    let [ho, wo, lo] = meta.out_dims;
    let [kh, kw, kl] = meta.kdims;
    let [sh, sw, sl] = meta.stride;
    let [ph, pw, pl] = meta.pad_lo;
    let cin = meta.cin;
    let cout = meta.cout;
    for b in 0..meta.batch {
        for oh in 0..ho {
            for ow in 0..wo {
                for ol in 0..lo {
                    let orow = (((b * ho + oh) * wo + ow) * lo + ol) * cout;
                    for khi in 0..kh {
                        let ih = (oh * sh + khi).wrapping_sub(ph);
                        if ih >= h {
                            continue;
                        }
                        for kwi in 0..kw {
                            let iw = (ow * sw + kwi).wrapping_sub(pw);
                            if iw >= w {
                                continue;
                            }
                            for kli in 0..kl {
                                let il = (ol * sl + kli).wrapping_sub(pl);
                                if il >= l {
                                    continue;
                                }
                                let irow = (((b * h + ih) * w + iw) * l + il) * cin;
                                let tap = (khi * kw + kwi) * kl + kli;
                                f(irow, orow, tap);
                            }
                        }
                    }
                }
            }
        }
    }
}

pub fn conv3d_forward<T: Scalar>(x: &[T], kern: &[T], meta: &ConvMeta) -> Vec<T> {
    let cig = meta.cin / meta.groups;
    let cog = meta.cout / meta.groups;
    let cout = meta.cout;
    let out_len = meta.batch * meta.out_dims.iter().product::<usize>() * cout;
    let mut out = vec![T::zero(); out_len];
    if meta.is_depthwise() {
        conv_positions(meta, |irow, orow, tap| {
            let xr = &x[irow..irow + cout];
            let kr = &kern[tap * cout..(tap + 1) * cout];
            let or_ = &mut out[orow..orow + cout];
            for ((o, &xv), &kv) in or_.iter_mut().zip(xr).zip(kr) {
                *o += xv * kv;
            }
        });
    } else {
        conv_positions(meta, |irow, orow, tap| {
            let kbase = tap * cig * cout;
            for g in 0..meta.groups {
                let xr = &x[irow + g * cig..irow + (g + 1) * cig];
                let or_ = &mut out[orow + g * cog..orow + (g + 1) * cog];
                for (ci, &xv) in xr.iter().enumerate() {
                    let kr = &kern[kbase + ci * cout + g * cog..kbase + ci * cout + (g + 1) * cog];
                    for (o, &kv) in or_.iter_mut().zip(kr) {
                        *o += xv * kv;
                    }
                }
            }
        });
    }
    out
}

/// Accumulates input and kernel gradients for a recorded convolution.
/// Either gradient may be `None` when that operand does not require one.
pub fn conv3d_backward<T: Scalar>(
    x: &[T],
    kern: &[T],
    dout: &[T],
    meta: &ConvMeta,
    mut dx: Option<&mut [T]>,
    mut dk: Option<&mut [T]>,
) {
    let cig = meta.cin / meta.groups;
    let cog = meta.cout / meta.groups;
    let cout = meta.cout;
    if meta.is_depthwise() {
        conv_positions(meta, |irow, orow, tap| {
            let xr = &x[irow..irow + cout];
            let kr = &kern[tap * cout..(tap + 1) * cout];
            let dr = &dout[orow..orow + cout];
            if let Some(dx) = dx.as_deref_mut() {
                let dxr = &mut dx[irow..irow + cout];
                for ((g, &dv), &kv) in dxr.iter_mut().zip(dr).zip(kr) {
                    *g += dv * kv;
                }
            }
            if let Some(dk) = dk.as_deref_mut() {
                let dkr = &mut dk[tap * cout..(tap + 1) * cout];
                for ((g, &dv), &xv) in dkr.iter_mut().zip(dr).zip(xr) {
                    *g += dv * xv;
                }
            }
        });
        return;
    }
    // Kernel transposed per tap to [cout, cig] so the dx inner loop is
    // contiguous over input channels.
    let taps = meta.kdims.iter().product::<usize>();
    let mut kt = Vec::new();
    if dx.is_some() {
        kt.resize(kern.len(), T::zero());
        for tap in 0..taps {
            for ci in 0..cig {
                for co in 0..cout {
                    kt[(tap * cout + co) * cig + ci] = kern[(tap * cig + ci) * cout + co];
                }
            }
        }
    }
    conv_positions(meta, |irow, orow, tap| {
        let kbase = tap * cig * cout;
        for g in 0..meta.groups {
            let dr = &dout[orow + g * cog..orow + (g + 1) * cog];
            if let Some(dx) = dx.as_deref_mut() {
                let dxr = &mut dx[irow + g * cig..irow + (g + 1) * cig];
                for (co_local, &dv) in dr.iter().enumerate() {
                    let co = g * cog + co_local;
                    let ktr = &kt[(tap * cout + co) * cig..(tap * cout + co + 1) * cig];
                    for (gx, &kv) in dxr.iter_mut().zip(ktr) {
                        *gx += dv * kv;
                    }
                }
            }
            if let Some(dk) = dk.as_deref_mut() {
                let xr = &x[irow + g * cig..irow + (g + 1) * cig];
                for (ci, &xv) in xr.iter().enumerate() {
                    let dkr =
                        &mut dk[kbase + ci * cout + g * cog..kbase + ci * cout + (g + 1) * cog];
                    for (gk, &dv) in dkr.iter_mut().zip(dr) {
                        *gk += xv * dv;
                    }
                }
            }
        }
    });
}

// ── Row-wise ops (softmax, layer norm, cross-entropy) ───────────────────────

pub fn softmax_lastdim<T: Scalar>(x: &[T], cols: usize) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    for (xr, or_) in x.chunks_exact(cols).zip(out.chunks_exact_mut(cols)) {
        let max = xr.iter().cloned().fold(T::neg_infinity(), T::max);
        let mut denom = T::zero();
        for (o, &v) in or_.iter_mut().zip(xr) {
            *o = (v - max).exp();
            denom += *o;
        }
        for o in or_.iter_mut() {
            *o = *o / denom;
        }
    }
    out
}

pub fn softmax_backward<T: Scalar>(y: &[T], dy: &[T], cols: usize, dx: &mut [T]) {
    for ((yr, dyr), dxr) in y
        .chunks_exact(cols)
        .zip(dy.chunks_exact(cols))
        .zip(dx.chunks_exact_mut(cols))
    {
        let dot: T = yr.iter().zip(dyr).map(|(&s, &g)| s * g).sum();
        for ((gx, &s), &g) in dxr.iter_mut().zip(yr).zip(dyr) {
            *gx += s * (g - dot);
        }
    }
}

pub fn layer_norm_forward<T: Scalar>(x: &[T], cols: usize, gamma: &[T], beta: &[T], eps: T) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    let nc = T::lit(cols as f64);
    for (xr, or_) in x.chunks_exact(cols).zip(out.chunks_exact_mut(cols)) {
        let mean = xr.iter().cloned().sum::<T>() / nc;
        let var = xr.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / nc;
        let inv = (var + eps).sqrt().recip();
        for (((o, &v), &g), &b) in or_.iter_mut().zip(xr).zip(gamma).zip(beta) {
            *o = (v - mean) * inv * g + b;
        }
    }
    out
}

pub fn layer_norm_backward<T: Scalar>(
    x: &[T],
    cols: usize,
    gamma: &[T],
    eps: T,
    dy: &[T],
    dx: &mut [T],
    dgamma: &mut [T],
    dbeta: &mut [T],
) {
    let nc = T::lit(cols as f64);
    for ((xr, dyr), dxr) in x
        .chunks_exact(cols)
        .zip(dy.chunks_exact(cols))
        .zip(dx.chunks_exact_mut(cols))
    {
        let mean = xr.iter().cloned().sum::<T>() / nc;
        let var = xr.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / nc;
        let inv = (var + eps).sqrt().recip();
        let mut sum_dxhat = T::zero();
        let mut sum_dxhat_xhat = T::zero();
        for ((&v, &g), (&gam, (dg, db))) in xr
            .iter()
            .zip(dyr)
            .zip(gamma.iter().zip(dgamma.iter_mut().zip(dbeta.iter_mut())))
        {
            let xhat = (v - mean) * inv;
            let dxhat = g * gam;
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
            *dg += g * xhat;
            *db += g;
        }
        let m1 = sum_dxhat / nc;
        let m2 = sum_dxhat_xhat / nc;
        for ((gx, &v), (&g, &gam)) in dxr.iter_mut().zip(xr).zip(dyr.iter().zip(gamma)) {
            let xhat = (v - mean) * inv;
            let dxhat = g * gam;
            *gx += inv * (dxhat - m1 - xhat * m2);
        }
    }
}

/// Mean negative log-likelihood over the batch; returns (loss, cached softmax).
pub fn cross_entropy_forward<T: Scalar>(logits: &[T], labels: &[usize], cols: usize) -> (T, Vec<T>)
{
    let rows = labels.len();
    let mut probs = vec![T::zero(); logits.len()];
    let mut loss = T::zero();
    for ((xr, pr), &y) in logits
        .chunks_exact(cols)
        .zip(probs.chunks_exact_mut(cols))
        .zip(labels)
    {
        let max = xr.iter().cloned().fold(T::neg_infinity(), T::max);
        let mut denom = T::zero();
        for (p, &v) in pr.iter_mut().zip(xr) {
            *p = (v - max).exp();
            denom += *p;
        }
        for p in pr.iter_mut() {
            *p = *p / denom;
        }
        loss += denom.ln() + max - xr[y];
    }
    (loss / T::lit(rows as f64), probs)
}

pub fn cross_entropy_backward<T: Scalar>(
    probs: &[T],
    labels: &[usize],
    cols: usize,
    upstream: T,
    dlogits: &mut [T],
) {
    let scale = upstream / T::lit(labels.len() as f64);
    for ((pr, dr), &y) in probs
        .chunks_exact(cols)
        .zip(dlogits.chunks_exact_mut(cols))
        .zip(labels)
    {
        for (j, (g, &p)) in dr.iter_mut().zip(pr).enumerate() {
            let indicator = if j == y { T::one() } else { T::zero() };
            *g += (p - indicator) * scale;
        }
    }
}

// ── Elementwise and layout ops ──────────────────────────────────────────────

pub fn gelu_forward<T: Scalar>(x: &[T]) -> Vec<T> {
    let c = T::lit(0.797_884_560_802_865_4); // sqrt(2/pi)
    let a = T::lit(0.044715);
    let half = T::lit(0.5);
    x.iter()
        .map(|&v| half * v * (T::one() + (c * (v + a * v * v * v)).tanh()))
        .collect()
}

pub fn gelu_backward<T: Scalar>(x: &[T], dy: &[T], dx: &mut [T]) {
    let c = T::lit(0.797_884_560_802_865_4);
    let a = T::lit(0.044715);
    let half = T::lit(0.5);
    let three = T::lit(3.0);
    for ((gx, &v), &g) in dx.iter_mut().zip(x).zip(dy) {
        let u = c * (v + a * v * v * v);
        let t = u.tanh();
        let sech2 = T::one() - t * t;
        let du = c * (T::one() + three * a * v * v);
        *gx += g * (half * (T::one() + t) + half * v * sech2 * du);
    }
}

/// Walks an N-D permutation: `out[i0..] = src` at permuted coordinates.
pub fn permute_forward<T: Scalar>(src: &[T], shape: &[usize], perm: &[usize]) -> Vec<T> {
    let src_strides = strides_of(shape);
    let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let step: Vec<usize> = perm.iter().map(|&p| src_strides[p]).collect();
    let mut out = vec![T::zero(); src.len()];
    let ndim = out_shape.len();
    let mut idx = vec![0usize; ndim];
    let mut off = 0usize;
    for o in out.iter_mut() {
        *o = src[off];
        for d in (0..ndim).rev() {
            idx[d] += 1;
            off += step[d];
            if idx[d] < out_shape[d] {
                break;
            }
            idx[d] = 0;
            off -= step[d] * out_shape[d];
        }
    }
    out
}

/// Scatter for the permutation backward: `dst(at permuted coords) += dsrc`.
pub fn permute_backward<T: Scalar>(dy: &[T], shape: &[usize], perm: &[usize], dx: &mut [T]) {
    let src_strides = strides_of(shape);
    let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let step: Vec<usize> = perm.iter().map(|&p| src_strides[p]).collect();
    let ndim = out_shape.len();
    let mut idx = vec![0usize; ndim];
    let mut off = 0usize;
    for &g in dy.iter() {
        dx[off] += g;
        for d in (0..ndim).rev() {
            idx[d] += 1;
            off += step[d];
            if idx[d] < out_shape[d] {
                break;
            }
            idx[d] = 0;
            off -= step[d] * out_shape[d];
        }
    }
}

/// Center-crop geometry over the H, W, L axes of a `[B, H, W, L, C]` tensor.
#[derive(Debug, Clone)]
pub struct CropMeta {
    pub in_shape: [usize; 5],
    pub out_dims: [usize; 3],
    pub offset: [usize; 3],
}

impl CropMeta {
    pub fn resolve(in_shape: &[usize], out_dims: [usize; 3]) -> Result<Self> {
        if in_shape.len() != 5 {
            return Err(Error::shape(format!("crop input must be 5-D, got {in_shape:?}")));
        }
        let dims = [in_shape[1], in_shape[2], in_shape[3]];
        let mut offset = [0; 3];
        for d in 0..3 {
            if out_dims[d] > dims[d] || out_dims[d] == 0 {
                return Err(Error::shape(format!(
                    "cannot center-crop extent {} to {}",
                    dims[d], out_dims[d]
                )));
            }
            offset[d] = (dims[d] - out_dims[d]) / 2;
        }
        Ok(CropMeta {
            in_shape: [in_shape[0], in_shape[1], in_shape[2], in_shape[3], in_shape[4]],
            out_dims,
            offset,
        })
    }

    pub fn out_shape(&self) -> Vec<usize> {
        vec![self.in_shape[0], self.out_dims[0], self.out_dims[1], self.out_dims[2], self.in_shape[4]]
    }
}

pub fn crop_forward<T: Scalar>(x: &[T], meta: &CropMeta) -> Vec<T> {
    let [b, h, w, l, c] = meta.in_shape;
    let [ho, wo, lo] = meta.out_dims;
    let [oh, ow, ol] = meta.offset;
    let mut out = Vec::with_capacity(b * ho * wo * lo * c);
    for bi in 0..b {
        for hi in 0..ho {
            for wi in 0..wo {
                for li in 0..lo {
                    let src = ((((bi * h) + hi + oh) * w + wi + ow) * l + li + ol) * c;
                    out.extend_from_slice(&x[src..src + c]);
                }
            }
        }
    }
    out
}

pub fn crop_backward<T: Scalar>(dy: &[T], meta: &CropMeta, dx: &mut [T]) {
    let [b, h, w, l, c] = meta.in_shape;
    let [ho, wo, lo] = meta.out_dims;
    let [oh, ow, ol] = meta.offset;
    let mut src = 0;
    for bi in 0..b {
        for hi in 0..ho {
            for wi in 0..wo {
                for li in 0..lo {
                    let dst = ((((bi * h) + hi + oh) * w + wi + ow) * l + li + ol) * c;
                    for (g, &v) in dx[dst..dst + c].iter_mut().zip(&dy[src..src + c]) {
                        *g += v;
                    }
                    src += c;
                }
            }
        }
    }
}
