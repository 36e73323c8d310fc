//! Single-direction transfer tuning.
//!
//! A pretrained base model reads large patches from one sensor while a small
//! fresh auxiliary model reads concentric smaller patches from the same
//! scene. At every stage boundary the base feature map is detached,
//! projected through a pointwise bridge, center-cropped, and added to the
//! auxiliary activation, so information flows strictly base → aux. The base
//! itself keeps adapting slowly through its own lightweight classifier,
//! stepped at a reduced rate and period.

use std::path::Path;

use byteorder::ByteOrder;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::Digest;

use crate::data::{HsiCube, LabelMap};
use crate::error::{Error, Result};
use crate::kernels::Padding;
use crate::net::{apply_head, forward_features, Model, ModelVars, TriFormerConfig};
use crate::scalar::Scalar;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;
use crate::train::checkpoint::load_checkpoint;
use crate::train::metrics::{aa, kappa, oa, ConfusionMatrix};
use crate::train::optim::AdamW;
use crate::train::run::{argmax, repeat_runs, EpochStats, History, MetricsReport, PatchSet, RunSummary};
use crate::train::config::{Schedule, TrainConfig};

// ── configuration ──

/// Settings coupling a pretrained base model to a fresh auxiliary model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdtConfig {
    /// Architecture of the auxiliary model trained on the new data.
    pub aux: TriFormerConfig,
    /// Base step size as a fraction of the hot learning rate, in `[0, 1]`.
    /// Zero freezes the base exactly.
    #[serde(default = "d_cold_factor")]
    pub cold_factor: f64,
    /// The base steps only every `cold_period`-th optimizer step.
    #[serde(default = "d_cold_period")]
    pub cold_period: usize,
}

fn d_cold_factor() -> f64 {
    0.1
}

fn d_cold_period() -> usize {
    1
}

impl SdtConfig {
    /// Default transfer setup: a small auxiliary network for the given
    /// band/class counts, base nudged at a tenth of the hot rate.
    pub fn new(in_bands: usize, num_classes: usize) -> Self {
        SdtConfig {
            aux: TriFormerConfig::tiny(in_bands, num_classes),
            cold_factor: d_cold_factor(),
            cold_period: d_cold_period(),
        }
    }

    /// Checks the pairing against the base architecture: the auxiliary
    /// receptive field must be strictly smaller yet structurally nested so
    /// every boundary crop is concentric.
    pub fn validate(&self, base: &TriFormerConfig) -> Result<()> {
        let aux = self.aux.clone().normalize()?;
        if !self.cold_factor.is_finite() || !(0.0..=1.0).contains(&self.cold_factor) {
            return Err(Error::config(format!(
                "cold_factor must lie in [0, 1], got {}",
                self.cold_factor
            )));
        }
        if self.cold_period == 0 {
            return Err(Error::config("cold_period must be >= 1"));
        }
        if aux.patch >= base.patch {
            return Err(Error::config(format!(
                "auxiliary patch {} must be smaller than base patch {}",
                aux.patch, base.patch
            )));
        }
        if aux.in_bands != base.in_bands {
            return Err(Error::config(format!(
                "auxiliary expects {} bands but the base was trained on {}",
                aux.in_bands, base.in_bands
            )));
        }
        if aux.stage_depths.len() != base.stage_depths.len() {
            return Err(Error::config(format!(
                "auxiliary has {} stages but the base has {}",
                aux.stage_depths.len(),
                base.stage_depths.len()
            )));
        }
        for (b, (a, g)) in aux.stage_extents().iter().zip(base.stage_extents()).enumerate() {
            if a[0] > g[0] || a[1] > g[1] || a[2] > g[2] {
                return Err(Error::config(format!(
                    "auxiliary extent {a:?} exceeds base extent {g:?} at boundary {b}"
                )));
            }
        }
        Ok(())
    }
}

// ── dual model ──

/// A pretrained base model feeding a fresh auxiliary model through
/// zero-initialized pointwise bridges. The base's stored classifier head is
/// carried along but never used; its slow adaptation runs through the
/// separate `cold_w`/`cold_b` classifier on pooled base features.
#[derive(Debug, Clone)]
pub struct DualModel<T: Scalar> {
    pub base: Model<T>,
    pub aux: Model<T>,
    /// Pointwise kernels `[1,1,1, base_c, aux_c]`, one per boundary
    /// (stem output, then each stage input).
    pub bridges: Vec<Tensor<T>>,
    /// Classifier on pooled base features, sharing the tuning labels.
    pub cold_w: Tensor<T>,
    pub cold_b: Tensor<T>,
    pub cold_factor: f64,
    pub cold_period: usize,
}

/// Tape handles for everything a dual forward touches.
#[derive(Debug, Clone)]
pub struct DualVars {
    pub base: ModelVars,
    pub aux: ModelVars,
    pub bridges: Vec<Var>,
    pub cold_w: Var,
    pub cold_b: Var,
}

/// Output handles of a dual forward pass.
#[derive(Debug, Clone, Copy)]
pub struct SdtOut {
    /// Tuning logits from the auxiliary head.
    pub logits: Var,
    /// Logits of the base-side classifier, when requested.
    pub cold_logits: Option<Var>,
}

impl<T: Scalar> DualModel<T> {
    /// Pairs a pretrained base with a freshly seeded auxiliary model.
    /// Bridges and the base-side classifier start at zero, so the first
    /// forward is exactly the auxiliary acting alone.
    pub fn new(base: Model<T>, cfg: &SdtConfig, seed: u64) -> Result<Self> {
        cfg.validate(&base.config)?;
        let aux = Model::init(cfg.aux.clone(), seed)?;
        let bridges = base
            .config
            .stage_widths
            .iter()
            .zip(&aux.config.stage_widths)
            .map(|(&cb, &ca)| Tensor::zeros(vec![1, 1, 1, cb, ca]))
            .collect();
        Ok(DualModel {
            cold_w: Tensor::zeros(vec![base.config.feature_width(), aux.config.num_classes]),
            cold_b: Tensor::zeros(vec![aux.config.num_classes]),
            cold_factor: cfg.cold_factor,
            cold_period: cfg.cold_period,
            base,
            aux,
            bridges,
        })
    }

    /// Visits every tensor of the coupled system under namespaced names:
    /// `base.*`, `aux.*`, `bridge.{i}`, `cold.weight`, `cold.bias`.
    pub fn visit(&self, f: &mut dyn FnMut(String, &Tensor<T>)) {
        self.base.visit(&mut |n, t| f(format!("base.{n}"), t));
        self.aux.visit(&mut |n, t| f(format!("aux.{n}"), t));
        for (i, b) in self.bridges.iter().enumerate() {
            f(format!("bridge.{i}"), b);
        }
        f("cold.weight".into(), &self.cold_w);
        f("cold.bias".into(), &self.cold_b);
    }

    /// Mutable variant of [`visit`](Self::visit), same order and names.
    pub fn visit_mut(&mut self, f: &mut dyn FnMut(String, &mut Tensor<T>)) {
        self.base.visit_mut(&mut |n, t| f(format!("base.{n}"), t));
        self.aux.visit_mut(&mut |n, t| f(format!("aux.{n}"), t));
        for (i, b) in self.bridges.iter_mut().enumerate() {
            f(format!("bridge.{i}"), b);
        }
        f("cold.weight".into(), &mut self.cold_w);
        f("cold.bias".into(), &mut self.cold_b);
    }

    /// Registers both models and the coupling parameters on the tape.
    /// `hot` marks the auxiliary side (aux model and bridges) trainable;
    /// `cold` marks the base side (base model and its classifier).
    pub fn bind(&self, tape: &mut Tape<T>, hot: bool, cold: bool) -> Result<DualVars> {
        let reg = |tape: &mut Tape<T>, t: &Tensor<T>, trainable: bool| {
            if trainable {
                tape.param(t)
            } else {
                tape.leaf(t)
            }
        };
        let base = self.base.bind(tape, cold)?;
        let aux = self.aux.bind(tape, hot)?;
        let mut bridges = Vec::with_capacity(self.bridges.len());
        for b in &self.bridges {
            bridges.push(reg(tape, b, hot)?);
        }
        Ok(DualVars {
            base,
            aux,
            bridges,
            cold_w: reg(tape, &self.cold_w, cold)?,
            cold_b: reg(tape, &self.cold_b, cold)?,
        })
    }
}

// ── paired data ──

/// Patch sets at the base and auxiliary receptive sizes, extracted from the
/// same pixels in the same order so the label streams coincide.
#[derive(Debug, Clone)]
pub struct DualPatchSet {
    pub base: PatchSet,
    pub aux: PatchSet,
}

impl DualPatchSet {
    pub fn from_cube(
        cube: &HsiCube,
        labels: &LabelMap,
        pixels: &[usize],
        base_patch: usize,
        aux_patch: usize,
    ) -> Result<Self> {
        if aux_patch >= base_patch {
            return Err(Error::config(format!(
                "auxiliary patch {aux_patch} must be smaller than base patch {base_patch}"
            )));
        }
        Ok(DualPatchSet {
            base: PatchSet::from_cube(cube, labels, pixels, base_patch)?,
            aux: PatchSet::from_cube(cube, labels, pixels, aux_patch)?,
        })
    }

    pub fn len(&self) -> usize {
        self.aux.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aux.is_empty()
    }
}

// ── forward ──

/// Runs the coupled forward pass: base features are detached, bridged,
/// center-cropped to the matching auxiliary boundary extent, and added to
/// the auxiliary activation there. Gradients therefore never reach the base
/// through the bridges; only the optional base-side classifier (`with_cold`)
/// trains it.
pub fn sdt_forward<T: Scalar>(
    tape: &mut Tape<T>,
    dual: &DualModel<T>,
    vars: &DualVars,
    x_base: Var,
    x_aux: Var,
    with_cold: bool,
) -> Result<SdtOut> {
    let nb = tape.shape(x_base)[0];
    let na = tape.shape(x_aux)[0];
    if nb != na {
        return Err(Error::shape(format!(
            "base batch {nb} and auxiliary batch {na} must pair up"
        )));
    }

    let base_taps = forward_features(tape, &dual.base.config, &vars.base, x_base, None)?;

    let aux_extents = dual.aux.config.stage_extents();
    let boundary_feats: Vec<Var> =
        std::iter::once(base_taps.stem).chain(base_taps.stages.iter().copied()).collect();
    if boundary_feats.len() != vars.bridges.len() || boundary_feats.len() != aux_extents.len() {
        return Err(Error::shape(format!(
            "{} base boundaries vs {} bridges",
            boundary_feats.len(),
            vars.bridges.len()
        )));
    }
    let mut feeds = Vec::with_capacity(vars.bridges.len());
    for ((feat, bridge), ext) in boundary_feats.iter().zip(&vars.bridges).zip(&aux_extents) {
        let cut = tape.detach(*feat)?;
        let bridged = tape.conv3d(cut, *bridge, [1, 1, 1], Padding::Same, 1)?;
        feeds.push(tape.crop_center(bridged, *ext)?);
    }

    let mut hook = |tape: &mut Tape<T>, k: usize, x: Var| -> Result<Var> {
        let feed = feeds
            .get(k)
            .copied()
            .ok_or_else(|| Error::shape(format!("no bridge for boundary {k}")))?;
        tape.add(x, feed)
    };
    let aux_taps = forward_features(tape, &dual.aux.config, &vars.aux, x_aux, Some(&mut hook))?;
    let logits = apply_head(tape, vars.aux.head_w, vars.aux.head_b, aux_taps.last())?;

    let cold_logits = if with_cold {
        Some(apply_head(tape, vars.cold_w, vars.cold_b, base_taps.last())?)
    } else {
        None
    };
    Ok(SdtOut { logits, cold_logits })
}

// ── optimization ──

fn numeric_context(e: Error, epoch: usize, batch: usize, lr: f64) -> Error {
    match e {
        Error::Numeric(msg) => {
            Error::Numeric(format!("epoch {epoch}, batch {batch}, lr {lr:.3e}: {msg}"))
        }
        other => other,
    }
}

/// One coupled optimizer step over the indexed samples. The auxiliary side
/// (aux model and bridges) steps at `hot_lr` every call; on calls where
/// `step_index` is a multiple of the cold period and `cold_factor > 0`, the
/// base steps at `cold_factor * hot_lr` through its own classifier (itself
/// stepped at the hot rate — it must track the labels quickly to supply a
/// useful signal). With `cold_factor == 0` the base path is skipped
/// entirely, leaving it bit-identical. Returns (mean tuning loss, argmax
/// hits from the auxiliary head).
pub fn sdt_step<T: Scalar>(
    dual: &mut DualModel<T>,
    opt: &mut AdamW<T>,
    data: &DualPatchSet,
    idx: &[usize],
    hot_lr: f64,
    weight_decay: f64,
    step_index: usize,
) -> Result<(f64, usize)> {
    let cold = dual.cold_factor > 0.0 && step_index % dual.cold_period == 0;
    let (xb, yb) = data.base.batch::<T>(idx)?;
    let (xa, ya) = data.aux.batch::<T>(idx)?;
    if yb != ya {
        return Err(Error::data("paired patch sets disagree on labels"));
    }

    let mut tape = Tape::new();
    let xbv = tape.leaf(&xb)?;
    let xav = tape.leaf(&xa)?;
    let vars = dual.bind(&mut tape, true, cold)?;
    let out = sdt_forward(&mut tape, dual, &vars, xbv, xav, cold)?;
    let hot_loss = tape.cross_entropy(out.logits, &ya)?;
    // The two losses touch disjoint parameters, so one backward sweep over
    // their sum yields exactly the per-path gradients.
    let total = match out.cold_logits {
        Some(cl) => {
            let cold_loss = tape.cross_entropy(cl, &ya)?;
            tape.add(hot_loss, cold_loss)?
        }
        None => hot_loss,
    };
    let mut grads = tape.backward(total)?;

    let classes = dual.aux.config.num_classes;
    let mut hits = 0;
    for (row, &want) in tape.value(out.logits).chunks_exact(classes).zip(&ya) {
        if argmax(row) == want {
            hits += 1;
        }
    }
    let loss_val = tape
        .scalar(hot_loss)?
        .to_f64()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::numeric("tuning loss is not finite"))?;

    dual.aux.absorb_grads(&vars.aux, &mut grads)?;
    for (t, v) in dual.bridges.iter_mut().zip(&vars.bridges) {
        if let Some(g) = grads.take(*v) {
            t.accum_grad(&g)?;
        }
    }
    opt.apply_prefixed(&mut dual.aux, "aux.", hot_lr, weight_decay)?;
    for (i, t) in dual.bridges.iter_mut().enumerate() {
        opt.apply_tensor(&format!("bridge.{i}"), t, hot_lr, weight_decay)?;
    }

    if cold {
        dual.base.absorb_grads(&vars.base, &mut grads)?;
        if let Some(g) = grads.take(vars.cold_w) {
            dual.cold_w.accum_grad(&g)?;
        }
        if let Some(g) = grads.take(vars.cold_b) {
            dual.cold_b.accum_grad(&g)?;
        }
        opt.apply_prefixed(&mut dual.base, "base.", dual.cold_factor * hot_lr, weight_decay)?;
        opt.apply_tensor("cold.weight", &mut dual.cold_w, hot_lr, weight_decay)?;
        opt.apply_tensor("cold.bias", &mut dual.cold_b, hot_lr, weight_decay)?;
    }
    Ok((loss_val, hits))
}

/// Seeded transfer-tuning loop mirroring ordinary training: shuffled
/// batches, warmup+cosine schedule on the hot rate, per-epoch stats from
/// the auxiliary head. Tuning batches are small, so no micro-batch
/// splitting is applied. `epochs == 0` returns an empty history and leaves
/// the dual untouched.
pub fn tune<T: Scalar>(
    dual: &mut DualModel<T>,
    data: &DualPatchSet,
    cfg: &TrainConfig,
) -> Result<History> {
    if cfg.epochs == 0 {
        return Ok(History::default());
    }
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::data("tuning set is empty"));
    }
    if data.aux.classes != dual.aux.config.num_classes {
        return Err(Error::config(format!(
            "{} data classes vs {} auxiliary classes",
            data.aux.classes, dual.aux.config.num_classes
        )));
    }
    let steps_per_epoch = data.len().div_ceil(cfg.batch);
    let schedule = Schedule::new(cfg, steps_per_epoch)?;
    let mut opt = AdamW::<T>::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = History::default();
    let mut step = 0usize;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut hits = 0usize;
        let mut lr = schedule.lr_at(step);

        for (batch_no, chunk) in order.chunks(cfg.batch).enumerate() {
            lr = schedule.lr_at(step);
            let (loss_val, batch_hits) =
                sdt_step(dual, &mut opt, data, chunk, lr, cfg.weight_decay, step)
                    .map_err(|e| numeric_context(e, epoch, batch_no, lr))?;
            loss_sum += loss_val * chunk.len() as f64;
            hits += batch_hits;
            step += 1;
        }

        let train_oa = hits as f64 / data.len() as f64;
        history.epochs.push(EpochStats {
            epoch,
            loss: loss_sum / data.len() as f64,
            train_oa,
            lr,
        });
        if cfg.stop_at_train_oa.is_some_and(|th| train_oa >= th) {
            break;
        }
    }
    Ok(history)
}

// ── evaluation & orchestration ──

/// Predicted class per paired sample (auxiliary head), in set order.
pub fn predict_dual<T: Scalar>(
    dual: &DualModel<T>,
    data: &DualPatchSet,
    batch: usize,
) -> Result<Vec<usize>> {
    if batch == 0 {
        return Err(Error::usage("evaluation batch must be >= 1"));
    }
    if data.aux.classes != dual.aux.config.num_classes {
        return Err(Error::config(format!(
            "{} data classes vs {} auxiliary classes",
            data.aux.classes, dual.aux.config.num_classes
        )));
    }
    let classes = dual.aux.config.num_classes;
    let mut preds = Vec::with_capacity(data.len());
    let all: Vec<usize> = (0..data.len()).collect();
    for chunk in all.chunks(batch) {
        let (xb, yb) = data.base.batch::<T>(chunk)?;
        let (xa, ya) = data.aux.batch::<T>(chunk)?;
        if yb != ya {
            return Err(Error::data("paired patch sets disagree on labels"));
        }
        let mut tape = Tape::new();
        let xbv = tape.leaf(&xb)?;
        let xav = tape.leaf(&xa)?;
        let vars = dual.bind(&mut tape, false, false)?;
        let out = sdt_forward(&mut tape, dual, &vars, xbv, xav, false)?;
        preds.extend(tape.value(out.logits).chunks_exact(classes).map(argmax));
    }
    Ok(preds)
}

/// Tallies dual-network predictions (auxiliary head) over a labeled
/// paired set.
pub fn evaluate_dual<T: Scalar>(
    dual: &DualModel<T>,
    data: &DualPatchSet,
    batch: usize,
) -> Result<ConfusionMatrix> {
    let preds = predict_dual(dual, data, batch)?;
    let mut cm = ConfusionMatrix::new(dual.aux.config.num_classes);
    for (&want, got) in data.aux.y.iter().zip(preds) {
        cm.record(want, got);
    }
    Ok(cm)
}

/// Confusion matrix plus headline metrics for the dual network.
pub fn summarize_dual<T: Scalar>(
    dual: &DualModel<T>,
    data: &DualPatchSet,
    batch: usize,
) -> Result<(ConfusionMatrix, RunSummary)> {
    let cm = evaluate_dual(dual, data, batch)?;
    let summary = RunSummary { oa: oa(&cm)?, aa: aa(&cm)?, kappa: kappa(&cm)? };
    Ok((cm, summary))
}

/// Repeats tuning from the same pretrained base across `runs` seeds
/// (`cfg.seed` upward): each run redraws the auxiliary model, tunes on
/// `train_data`, and scores `test_data`.
pub fn tune_runs<T: Scalar>(
    base: &Model<T>,
    sdt: &SdtConfig,
    train_data: &DualPatchSet,
    test_data: &DualPatchSet,
    cfg: &TrainConfig,
    runs: usize,
) -> Result<MetricsReport> {
    repeat_runs(runs, cfg.seed, |seed| {
        let mut dual = DualModel::new(base.clone(), sdt, seed)?;
        let mut per_run = cfg.clone();
        per_run.seed = seed;
        tune(&mut dual, train_data, &per_run)?;
        let (_, summary) = summarize_dual(&dual, test_data, cfg.batch)?;
        Ok(summary)
    })
}

/// Loads a pretrained backbone for tuning. The stored classifier head rides
/// along unused; band counts must already agree, so resample the incoming
/// cube first.
pub fn load_pretrained(path: &Path, target_bands: usize) -> Result<Model<f32>> {
    let model = load_checkpoint(path)?;
    if model.config.in_bands != target_bands {
        return Err(Error::format(format!(
            "checkpoint was trained on {} bands but the tuning data has {target_bands}; \
             resample the cube to the base band count first",
            model.config.in_bands
        )));
    }
    Ok(model)
}

// ── dual archives ───────────────────────────────────────────────────────

const DUAL_MAGIC: &[u8; 4] = b"TFCD";
const DUAL_DTYPE: &str = "f32le";

#[derive(Serialize, Deserialize)]
struct DualTensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct DualHeader {
    base: TriFormerConfig,
    aux: TriFormerConfig,
    cold_factor: f64,
    cold_period: usize,
    tensors: Vec<DualTensorEntry>,
    dtype: String,
}

/// Writes the whole coupled system (both models, bridges, base-side
/// classifier) as one archive: `TFCD` magic, JSON header, little-endian
/// f32 payload, sha256 trailer.
pub fn save_dual<T: Scalar>(dual: &DualModel<T>, path: &Path) -> Result<()> {
    let mut entries = Vec::new();
    let mut payload = Vec::new();
    dual.visit(&mut |name, t| {
        entries.push(DualTensorEntry { name, shape: t.shape().to_vec() });
        let at = payload.len();
        payload.resize(at + 4 * t.numel(), 0);
        for (chunk, &v) in payload[at..].chunks_exact_mut(4).zip(t.data()) {
            byteorder::LittleEndian::write_f32(chunk, v.to_f32_lossy());
        }
    });
    let header = DualHeader {
        base: dual.base.config.clone(),
        aux: dual.aux.config.clone(),
        cold_factor: dual.cold_factor,
        cold_period: dual.cold_period,
        tensors: entries,
        dtype: DUAL_DTYPE.to_string(),
    };
    let header_bytes = serde_json::to_vec(&header)?;

    let mut bytes = Vec::with_capacity(8 + header_bytes.len() + payload.len() + 32);
    bytes.extend_from_slice(DUAL_MAGIC);
    bytes.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&header_bytes);
    bytes.extend_from_slice(&payload);
    let digest = sha2::Sha256::digest(&bytes);
    bytes.extend_from_slice(&digest);
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Loads a `TFCD` archive back into an `f32` dual model. Corruption and
/// inventory disagreements are format errors naming the offenders.
pub fn load_dual(path: &Path) -> Result<DualModel<f32>> {
    use byteorder::ByteOrder;

    let bytes = std::fs::read(path)?;
    if bytes.len() < 40 || &bytes[..4] != DUAL_MAGIC {
        return Err(Error::format(format!("{}: not a TFCD dual archive", path.display())));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 32);
    if sha2::Sha256::digest(body).as_slice() != trailer {
        return Err(Error::format(format!("{}: checksum mismatch", path.display())));
    }
    let header_len = byteorder::LittleEndian::read_u32(&bytes[4..8]) as usize;
    let payload_at = 8 + header_len;
    if body.len() < payload_at {
        return Err(Error::format(format!("{}: truncated header", path.display())));
    }
    let header: DualHeader = serde_json::from_slice(&body[8..payload_at])
        .map_err(|e| Error::format(format!("{}: bad header: {e}", path.display())))?;
    if header.dtype != DUAL_DTYPE {
        return Err(Error::format(format!(
            "{}: unsupported dtype {:?}",
            path.display(),
            header.dtype
        )));
    }

    let mut stored: std::collections::BTreeMap<String, (Vec<usize>, Vec<f32>)> =
        std::collections::BTreeMap::new();
    let mut at = payload_at;
    for e in header.tensors {
        let numel: usize = e.shape.iter().product();
        let end = at + 4 * numel;
        if end > body.len() {
            return Err(Error::format(format!(
                "{}: tensor {} overruns the payload",
                path.display(),
                e.name
            )));
        }
        let mut data = vec![0f32; numel];
        byteorder::LittleEndian::read_f32_into(&body[at..end], &mut data);
        if stored.insert(e.name.clone(), (e.shape, data)).is_some() {
            return Err(Error::format(format!(
                "{}: duplicate tensor {}",
                path.display(),
                e.name
            )));
        }
        at = end;
    }
    if at != body.len() {
        return Err(Error::format(format!(
            "{}: {} payload bytes beyond the declared tensors",
            path.display(),
            body.len() - at
        )));
    }

    let base = Model::<f32>::init(header.base, 0)?;
    let cfg = SdtConfig {
        aux: header.aux,
        cold_factor: header.cold_factor,
        cold_period: header.cold_period,
    };
    let mut dual = DualModel::new(base, &cfg, 0)?;
    let mut missing = Vec::new();
    let mut conflicts = Vec::new();
    let mut failed: Option<Error> = None;
    dual.visit_mut(&mut |name, t| {
        match stored.remove(&name) {
            None => missing.push(name),
            Some((shape, _)) if shape != t.shape() => {
                conflicts.push(format!("{name}: file {shape:?} vs model {:?}", t.shape()));
            }
            Some((shape, data)) => match Tensor::from_vec(shape, data) {
                Ok(new) => *t = new,
                Err(e) => failed = Some(e),
            },
        }
    });
    if let Some(e) = failed {
        return Err(e);
    }
    if !missing.is_empty() {
        return Err(Error::format(format!(
            "{}: missing tensors: {}",
            path.display(),
            missing.join(", ")
        )));
    }
    if !conflicts.is_empty() {
        return Err(Error::format(format!(
            "{}: shape conflicts: {}",
            path.display(),
            conflicts.join("; ")
        )));
    }
    if !stored.is_empty() {
        let names: Vec<String> = stored.into_keys().collect();
        return Err(Error::format(format!(
            "{}: unexpected tensors: {}",
            path.display(),
            names.join(", ")
        )));
    }
    Ok(dual)
}
