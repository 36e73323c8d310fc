//! Wengert-tape reverse-mode autodiff.
//!
//! A `Tape` records every forward op in issue order; `backward` replays the
//! list in reverse, visiting each node exactly once. Tapes are built fresh
//! for each forward pass, confined to one thread, and support first-order
//! gradients only. Every forward output is scanned for NaN/Inf and a
//! non-finite value raises a numeric error immediately.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernels::{self, ConvMeta, CropMeta, MatDims, Padding};
use crate::scalar::Scalar;
use crate::tensor::{numel_of, Tensor};

/// Handle to a node on a tape. Only valid for the tape that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

#[derive(Debug)]
enum Op<T: Scalar> {
    Leaf,
    Matmul { a: Var, b: Var, dims: MatDims },
    Conv3d { x: Var, k: Var, meta: ConvMeta },
    Softmax { x: Var },
    LayerNorm { x: Var, gamma: Var, beta: Var, eps: T },
    Gelu { x: Var },
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    BiasAdd { x: Var, b: Var },
    Scale { x: Var, c: T },
    Reshape { x: Var },
    Permute { x: Var, perm: Vec<usize> },
    CropCenter { x: Var, meta: CropMeta },
    GlobalAvgPool { x: Var },
    Sum { x: Var },
    CrossEntropy { logits: Var, labels: Arc<Vec<usize>>, probs: Arc<Vec<T>> },
}

#[derive(Debug)]
struct Node<T: Scalar> {
    shape: Vec<usize>,
    data: Arc<Vec<T>>,
    op: Op<T>,
    /// True when a grad-requiring leaf is reachable below this node.
    live: bool,
}

/// Gradients produced by one backward pass, indexed by `Var`.
#[derive(Debug)]
pub struct Grads<T: Scalar> {
    g: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Grads<T> {
    pub fn get(&self, v: Var) -> Option<&[T]> {
        self.g.get(v.0).and_then(|o| o.as_deref())
    }

    pub fn take(&mut self, v: Var) -> Option<Vec<T>> {
        self.g.get_mut(v.0).and_then(|o| o.take())
    }
}

/// Recording tape. MAC and elementwise-op counters are always maintained;
/// they cost one integer add per recorded op.
#[derive(Debug)]
pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
    macs: u64,
    eltwise: BTreeMap<&'static str, u64>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new(), macs: 0, eltwise: BTreeMap::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Forward multiply-accumulate count since construction or reset.
    pub fn macs(&self) -> u64 {
        self.macs
    }

    pub fn reset_macs(&mut self) {
        self.macs = 0;
    }

    /// Per-kind elementwise operation counts (elements processed).
    pub fn eltwise_counts(&self) -> &BTreeMap<&'static str, u64> {
        &self.eltwise
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.nodes[v.0].data
    }

    /// Extracts a scalar node's value.
    pub fn scalar(&self, v: Var) -> Result<T> {
        let n = &self.nodes[v.0];
        if n.data.len() != 1 {
            return Err(Error::shape(format!("expected scalar, got shape {:?}", n.shape)));
        }
        Ok(n.data[0])
    }

    /// Copies a node's value out as a `Tensor`.
    pub fn tensor(&self, v: Var) -> Tensor<T> {
        let n = &self.nodes[v.0];
        Tensor::from_vec(n.shape.clone(), n.data.to_vec()).expect("tape values stay finite")
    }

    fn push(&mut self, shape: Vec<usize>, data: Arc<Vec<T>>, op: Op<T>, live: bool, what: &str) -> Result<Var> {
        debug_assert_eq!(numel_of(&shape), data.len());
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::numeric(format!(
                "non-finite value {} at flat index {i} after {what}",
                data[i]
            )));
        }
        self.nodes.push(Node { shape, data, op, live });
        Ok(Var(self.nodes.len() - 1))
    }

    fn live(&self, v: Var) -> bool {
        self.nodes[v.0].live
    }

    fn count_eltwise(&mut self, kind: &'static str, elems: usize) {
        *self.eltwise.entry(kind).or_insert(0) += elems as u64;
    }

    // ── Leaves ──────────────────────────────────────────────────────────

    /// Registers a constant input (no gradient).
    pub fn leaf(&mut self, t: &Tensor<T>) -> Result<Var> {
        self.push(t.shape().to_vec(), t.data_arc(), Op::Leaf, false, "leaf")
    }

    /// Registers a trainable parameter (receives a gradient).
    pub fn param(&mut self, t: &Tensor<T>) -> Result<Var> {
        self.push(t.shape().to_vec(), t.data_arc(), Op::Leaf, true, "param")
    }

    /// Re-registers a tape value as a constant leaf: gradients stop here.
    pub fn detach(&mut self, v: Var) -> Result<Var> {
        let (shape, data) = {
            let n = &self.nodes[v.0];
            (n.shape.clone(), Arc::clone(&n.data))
        };
        self.push(shape, data, Op::Leaf, false, "detach")
    }

    // ── Linear algebra ──────────────────────────────────────────────────

    /// Batched matrix product `[..., m, k] x [..., k, n]` with right-aligned
    /// broadcasting over the batch dims.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let dims = MatDims::resolve(self.shape(a), self.shape(b))?;
        let out = kernels::matmul_forward(self.value(a), self.value(b), &dims);
        self.macs += dims.macs();
        let live = self.live(a) || self.live(b);
        let shape = dims.out_shape();
        self.push(shape, Arc::new(out), Op::Matmul { a, b, dims }, live, "matmul")
    }

    /// 3-D convolution over `[B, H, W, L, Cin]` with kernel
    /// `[kh, kw, kl, Cin/groups, Cout]`; cross-correlation semantics.
    pub fn conv3d(
        &mut self,
        x: Var,
        k: Var,
        stride: [usize; 3],
        padding: Padding,
        groups: usize,
    ) -> Result<Var> {
        let meta = ConvMeta::resolve(self.shape(x), self.shape(k), stride, padding, groups)?;
        let out = kernels::conv3d_forward(self.value(x), self.value(k), &meta);
        self.macs += meta.macs();
        let live = self.live(x) || self.live(k);
        let shape = meta.out_shape();
        self.push(shape, Arc::new(out), Op::Conv3d { x, k, meta }, live, "conv3d")
    }

    // ── Row-wise ops ────────────────────────────────────────────────────

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let cols = *shape.last().ok_or_else(|| Error::shape("softmax needs at least 1-D input"))?;
        if cols == 0 {
            return Err(Error::shape("softmax over an empty axis"));
        }
        let out = kernels::softmax_lastdim(self.value(x), cols);
        self.count_eltwise("softmax", out.len());
        let live = self.live(x);
        self.push(shape, Arc::new(out), Op::Softmax { x }, live, "softmax")
    }

    /// Layer normalization over the channel (last) axis with affine params.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let cols = *shape.last().ok_or_else(|| Error::shape("layer_norm needs at least 1-D input"))?;
        for (name, v) in [("gamma", gamma), ("beta", beta)] {
            if self.shape(v) != [cols] {
                return Err(Error::shape(format!(
                    "layer_norm {name} shape {:?} must be [{cols}]",
                    self.shape(v)
                )));
            }
        }
        let eps_t = T::lit(eps);
        let out = kernels::layer_norm_forward(self.value(x), cols, self.value(gamma), self.value(beta), eps_t);
        self.count_eltwise("layer_norm", out.len());
        let live = self.live(x) || self.live(gamma) || self.live(beta);
        self.push(shape, Arc::new(out), Op::LayerNorm { x, gamma, beta, eps: eps_t }, live, "layer_norm")
    }

    /// Mean cross-entropy between logits `[B, C]` and class indices `[B]`.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let shape = self.shape(logits).to_vec();
        if shape.len() != 2 {
            return Err(Error::shape(format!("cross_entropy logits must be [B, C], got {shape:?}")));
        }
        let (rows, cols) = (shape[0], shape[1]);
        if labels.len() != rows {
            return Err(Error::shape(format!(
                "cross_entropy got {} labels for batch {rows}",
                labels.len()
            )));
        }
        if rows == 0 {
            return Err(Error::shape("cross_entropy on an empty batch"));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= cols) {
            return Err(Error::data(format!(
                "cross_entropy label {bad} out of range for {cols} classes"
            )));
        }
        let (loss, probs) = kernels::cross_entropy_forward(self.value(logits), labels, cols);
        self.count_eltwise("cross_entropy", rows * cols);
        let live = self.live(logits);
        let op = Op::CrossEntropy {
            logits,
            labels: Arc::new(labels.to_vec()),
            probs: Arc::new(probs),
        };
        self.push(vec![1], Arc::new(vec![loss]), op, live, "cross_entropy")
    }

    // ── Elementwise ops ─────────────────────────────────────────────────

    /// Tanh-approximated GELU activation.
    pub fn gelu(&mut self, x: Var) -> Result<Var> {
        let out = kernels::gelu_forward(self.value(x));
        self.count_eltwise("gelu", out.len());
        let (shape, live) = (self.shape(x).to_vec(), self.live(x));
        self.push(shape, Arc::new(out), Op::Gelu { x }, live, "gelu")
    }

    /// Elementwise sum of two same-shape tensors.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(format!(
                "add shapes differ: {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        let out: Vec<T> = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| x + y).collect();
        self.count_eltwise("add", out.len());
        let (shape, live) = (self.shape(a).to_vec(), self.live(a) || self.live(b));
        self.push(shape, Arc::new(out), Op::Add { a, b }, live, "add")
    }

    /// Elementwise product of two same-shape tensors.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(format!(
                "mul shapes differ: {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        let out: Vec<T> = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| x * y).collect();
        self.count_eltwise("mul", out.len());
        let (shape, live) = (self.shape(a).to_vec(), self.live(a) || self.live(b));
        self.push(shape, Arc::new(out), Op::Mul { a, b }, live, "mul")
    }

    /// Adds a `[C]` bias over the last axis.
    pub fn bias_add(&mut self, x: Var, b: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let cols = *shape.last().ok_or_else(|| Error::shape("bias_add needs at least 1-D input"))?;
        if self.shape(b) != [cols] {
            return Err(Error::shape(format!(
                "bias shape {:?} must be [{cols}]",
                self.shape(b)
            )));
        }
        let bias = self.value(b).to_vec();
        let out: Vec<T> = self
            .value(x)
            .chunks_exact(cols)
            .flat_map(|row| row.iter().zip(&bias).map(|(&v, &bv)| v + bv))
            .collect();
        self.count_eltwise("bias_add", out.len());
        let live = self.live(x) || self.live(b);
        self.push(shape, Arc::new(out), Op::BiasAdd { x, b }, live, "bias_add")
    }

    /// Multiplies by a compile-time constant scalar.
    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        if !c.is_finite() {
            return Err(Error::numeric(format!("scale constant {c} is not finite")));
        }
        let ct = T::lit(c);
        let out: Vec<T> = self.value(x).iter().map(|&v| v * ct).collect();
        self.count_eltwise("scale", out.len());
        let (shape, live) = (self.shape(x).to_vec(), self.live(x));
        self.push(shape, Arc::new(out), Op::Scale { x, c: ct }, live, "scale")
    }

    // ── Layout ops ──────────────────────────────────────────────────────

    /// Reinterprets the shape; element count must be preserved.
    pub fn reshape(&mut self, x: Var, new_shape: Vec<usize>) -> Result<Var> {
        if numel_of(&new_shape) != numel_of(self.shape(x)) {
            return Err(Error::shape(format!(
                "reshape {:?} -> {new_shape:?} changes element count",
                self.shape(x)
            )));
        }
        let (data, live) = (Arc::clone(&self.nodes[x.0].data), self.live(x));
        self.push(new_shape, data, Op::Reshape { x }, live, "reshape")
    }

    /// Reorders axes by `perm` (a permutation of `0..ndim`).
    pub fn permute(&mut self, x: Var, perm: &[usize]) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let mut seen = vec![false; shape.len()];
        if perm.len() != shape.len() || perm.iter().any(|&p| p >= shape.len() || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::shape(format!(
                "permute {perm:?} is not a permutation of 0..{}",
                shape.len()
            )));
        }
        let out = kernels::permute_forward(self.value(x), &shape, perm);
        let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
        let live = self.live(x);
        self.push(out_shape, Arc::new(out), Op::Permute { x, perm: perm.to_vec() }, live, "permute")
    }

    /// Center-crops the H, W, L axes of a `[B, H, W, L, C]` tensor.
    pub fn crop_center(&mut self, x: Var, out_dims: [usize; 3]) -> Result<Var> {
        let meta = CropMeta::resolve(self.shape(x), out_dims)?;
        let out = kernels::crop_forward(self.value(x), &meta);
        let (shape, live) = (meta.out_shape(), self.live(x));
        self.push(shape, Arc::new(out), Op::CropCenter { x, meta }, live, "crop_center")
    }

    // ── Reductions ──────────────────────────────────────────────────────

    /// Mean over H, W, L of a `[B, H, W, L, C]` tensor, giving `[B, C]`.
    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if shape.len() != 5 {
            return Err(Error::shape(format!("global_avg_pool input must be 5-D, got {shape:?}")));
        }
        let (b, c) = (shape[0], shape[4]);
        let sites = shape[1] * shape[2] * shape[3];
        if sites == 0 {
            return Err(Error::shape("global_avg_pool over empty spatial extents"));
        }
        let inv = T::lit(1.0 / sites as f64);
        let mut out = vec![T::zero(); b * c];
        for (bi, block) in self.value(x).chunks_exact(sites * c).enumerate() {
            let orow = &mut out[bi * c..(bi + 1) * c];
            for row in block.chunks_exact(c) {
                for (o, &v) in orow.iter_mut().zip(row) {
                    *o += v;
                }
            }
            for o in orow.iter_mut() {
                *o = *o * inv;
            }
        }
        self.count_eltwise("avg_pool", b * sites * c);
        let live = self.live(x);
        self.push(vec![b, c], Arc::new(out), Op::GlobalAvgPool { x }, live, "global_avg_pool")
    }

    /// Sum of all elements, giving a `[1]` scalar.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let total: T = self.value(x).iter().cloned().sum();
        self.count_eltwise("sum", self.value(x).len());
        let live = self.live(x);
        self.push(vec![1], Arc::new(vec![total]), Op::Sum { x }, live, "sum")
    }

    // ── Backward ────────────────────────────────────────────────────────

    /// Reverse-mode sweep from a scalar loss. The tape itself is unchanged;
    /// call once per forward pass (first-order only).
    pub fn backward(&self, loss: Var) -> Result<Grads<T>> {
        let loss_node = &self.nodes[loss.0];
        if loss_node.data.len() != 1 {
            return Err(Error::usage(format!(
                "backward requires a scalar loss, got shape {:?}",
                loss_node.shape
            )));
        }
        let mut g: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        if !loss_node.live {
            // Nothing upstream requires a gradient.
            return Ok(Grads { g });
        }
        g[loss.0] = Some(vec![T::one()]);
        for id in (0..=loss.0).rev() {
            if !self.nodes[id].live || matches!(self.nodes[id].op, Op::Leaf) {
                continue;
            }
            let Some(dy) = g[id].take() else { continue };
            self.step_back(id, &dy, &mut g);
        }
        Ok(Grads { g })
    }

    /// Applies one node's backward rule, accumulating into input slots.
    fn step_back(&self, id: usize, dy: &[T], g: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[id];
        match &node.op {
            Op::Leaf => {}
            Op::Matmul { a, b, dims } => {
                let mut da = self.live(*a).then(|| vec![T::zero(); self.nodes[a.0].data.len()]);
                let mut db = self.live(*b).then(|| vec![T::zero(); self.nodes[b.0].data.len()]);
                kernels::matmul_backward(
                    &self.nodes[a.0].data,
                    &self.nodes[b.0].data,
                    dy,
                    dims,
                    da.as_deref_mut(),
                    db.as_deref_mut(),
                );
                if let Some(da) = da {
                    accumulate(&mut g[a.0], da);
                }
                if let Some(db) = db {
                    accumulate(&mut g[b.0], db);
                }
            }
            Op::Conv3d { x, k, meta } => {
                let mut dx = self.live(*x).then(|| vec![T::zero(); self.nodes[x.0].data.len()]);
                let mut dk = self.live(*k).then(|| vec![T::zero(); self.nodes[k.0].data.len()]);
                kernels::conv3d_backward(
                    &self.nodes[x.0].data,
                    &self.nodes[k.0].data,
                    dy,
                    meta,
                    dx.as_deref_mut(),
                    dk.as_deref_mut(),
                );
                if let Some(dx) = dx {
                    accumulate(&mut g[x.0], dx);
                }
                if let Some(dk) = dk {
                    accumulate(&mut g[k.0], dk);
                }
            }
            Op::Softmax { x } => {
                if self.live(*x) {
                    let cols = *node.shape.last().unwrap();
                    let mut dx = vec![T::zero(); node.data.len()];
                    kernels::softmax_backward(&node.data, dy, cols, &mut dx);
                    accumulate(&mut g[x.0], dx);
                }
            }
            Op::LayerNorm { x, gamma, beta, eps } => {
                let cols = *node.shape.last().unwrap();
                let mut dx = vec![T::zero(); self.nodes[x.0].data.len()];
                let mut dgamma = vec![T::zero(); cols];
                let mut dbeta = vec![T::zero(); cols];
                kernels::layer_norm_backward(
                    &self.nodes[x.0].data,
                    cols,
                    &self.nodes[gamma.0].data,
                    *eps,
                    dy,
                    &mut dx,
                    &mut dgamma,
                    &mut dbeta,
                );
                if self.live(*x) {
                    accumulate(&mut g[x.0], dx);
                }
                if self.live(*gamma) {
                    accumulate(&mut g[gamma.0], dgamma);
                }
                if self.live(*beta) {
                    accumulate(&mut g[beta.0], dbeta);
                }
            }
            Op::Gelu { x } => {
                if self.live(*x) {
                    let mut dx = vec![T::zero(); node.data.len()];
                    kernels::gelu_backward(&self.nodes[x.0].data, dy, &mut dx);
                    accumulate(&mut g[x.0], dx);
                }
            }
            Op::Add { a, b } => {
                if self.live(*a) {
                    accumulate(&mut g[a.0], dy.to_vec());
                }
                if self.live(*b) {
                    accumulate(&mut g[b.0], dy.to_vec());
                }
            }
            Op::Mul { a, b } => {
                if self.live(*a) {
                    let da: Vec<T> =
                        dy.iter().zip(self.nodes[b.0].data.iter()).map(|(&d, &v)| d * v).collect();
                    accumulate(&mut g[a.0], da);
                }
                if self.live(*b) {
                    let db: Vec<T> =
                        dy.iter().zip(self.nodes[a.0].data.iter()).map(|(&d, &v)| d * v).collect();
                    accumulate(&mut g[b.0], db);
                }
            }
            Op::BiasAdd { x, b } => {
                let cols = *node.shape.last().unwrap();
                if self.live(*x) {
                    accumulate(&mut g[x.0], dy.to_vec());
                }
                if self.live(*b) {
                    let mut db = vec![T::zero(); cols];
                    for row in dy.chunks_exact(cols) {
                        for (s, &v) in db.iter_mut().zip(row) {
                            *s += v;
                        }
                    }
                    accumulate(&mut g[b.0], db);
                }
            }
            Op::Scale { x, c } => {
                if self.live(*x) {
                    let dx: Vec<T> = dy.iter().map(|&v| v * *c).collect();
                    accumulate(&mut g[x.0], dx);
                }
            }
            Op::Reshape { x } => {
                if self.live(*x) {
                    accumulate(&mut g[x.0], dy.to_vec());
                }
            }
            Op::Permute { x, perm } => {
                if self.live(*x) {
                    let mut dx = vec![T::zero(); self.nodes[x.0].data.len()];
                    kernels::permute_backward(dy, &self.nodes[x.0].shape, perm, &mut dx);
                    accumulate(&mut g[x.0], dx);
                }
            }
            Op::CropCenter { x, meta } => {
                if self.live(*x) {
                    let mut dx = vec![T::zero(); self.nodes[x.0].data.len()];
                    kernels::crop_backward(dy, meta, &mut dx);
                    accumulate(&mut g[x.0], dx);
                }
            }
            Op::GlobalAvgPool { x } => {
                if self.live(*x) {
                    let xs = &self.nodes[x.0].shape;
                    let (b, c) = (xs[0], xs[4]);
                    let sites = xs[1] * xs[2] * xs[3];
                    let inv = T::lit(1.0 / sites as f64);
                    let mut dx = vec![T::zero(); self.nodes[x.0].data.len()];
                    for bi in 0..b {
                        let drow = &dy[bi * c..(bi + 1) * c];
                        for row in dx[bi * sites * c..(bi + 1) * sites * c].chunks_exact_mut(c) {
                            for (gx, &v) in row.iter_mut().zip(drow) {
                                *gx += v * inv;
                            }
                        }
                    }
                    accumulate(&mut g[x.0], dx);
                }
            }
            Op::Sum { x } => {
                if self.live(*x) {
                    let dx = vec![dy[0]; self.nodes[x.0].data.len()];
                    accumulate(&mut g[x.0], dx);
                }
            }
            Op::CrossEntropy { logits, labels, probs } => {
                if self.live(*logits) {
                    let cols = self.nodes[logits.0].shape[1];
                    let mut dl = vec![T::zero(); self.nodes[logits.0].data.len()];
                    kernels::cross_entropy_backward(probs, labels, cols, dy[0], &mut dl);
                    accumulate(&mut g[logits.0], dl);
                }
            }
        }
    }
}

/// Adds a contribution into a gradient slot, moving on first use.
fn accumulate<T: Scalar>(slot: &mut Option<Vec<T>>, contrib: Vec<T>) {
    match slot {
        None => *slot = Some(contrib),
        Some(buf) => {
            for (a, b) in buf.iter_mut().zip(contrib) {
                *a += b;
            }
        }
    }
}
