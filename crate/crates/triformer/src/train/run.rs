//! Training and evaluation loops over labeled patch sets.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{extract_patch, HsiCube, LabelMap};
use crate::error::{Error, Result};
use crate::net::{forward, Model};
use crate::scalar::Scalar;
use crate::tape::Tape;
use crate::tensor::Tensor;
use crate::train::config::{Schedule, TrainConfig};
use crate::train::metrics::{aa, kappa, oa, ConfusionMatrix};
use crate::train::optim::AdamW;

/// Labeled training/eval samples: per-sample `[patch, patch, L, 1]`
/// tensors with 0-based class targets.
#[derive(Debug, Clone)]
pub struct PatchSet {
    pub patch: usize,
    pub bands: usize,
    pub classes: usize,
    pub x: Vec<Tensor<f32>>,
    pub y: Vec<usize>,
}

impl PatchSet {
    /// Extracts patches for the given flat pixel indices; every indexed
    /// pixel must be labeled (1-based labels become 0-based classes).
    pub fn from_cube(
        cube: &HsiCube,
        labels: &LabelMap,
        pixels: &[usize],
        patch: usize,
    ) -> Result<Self> {
        if labels.h != cube.h || labels.w != cube.w {
            return Err(Error::data(format!(
                "label grid {}x{} does not match cube {}x{}",
                labels.h, labels.w, cube.h, cube.w
            )));
        }
        let mut x = Vec::with_capacity(pixels.len());
        let mut y = Vec::with_capacity(pixels.len());
        for &px in pixels {
            let lab = *labels.labels.get(px).ok_or_else(|| {
                Error::data(format!("pixel index {px} outside the label grid"))
            })?;
            if lab < 1 {
                return Err(Error::data(format!("pixel {px} is unlabeled")));
            }
            x.push(extract_patch(cube, px / cube.w, px % cube.w, patch)?);
            y.push(lab as usize - 1);
        }
        Ok(PatchSet { patch, bands: cube.l, classes: labels.num_classes(), x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Stacks the chosen samples into one `[K, patch, patch, L, 1]` batch.
    pub fn batch<T: Scalar>(&self, idx: &[usize]) -> Result<(Tensor<T>, Vec<usize>)> {
        if idx.is_empty() {
            return Err(Error::usage("empty batch"));
        }
        let per = self.patch * self.patch * self.bands;
        let mut data = Vec::with_capacity(idx.len() * per);
        let mut labels = Vec::with_capacity(idx.len());
        for &i in idx {
            let t = self.x.get(i).ok_or_else(|| {
                Error::usage(format!("sample index {i} outside patch set of {}", self.len()))
            })?;
            data.extend(t.data().iter().map(|&v| T::lit(v as f64)));
            labels.push(self.y[i]);
        }
        let x = Tensor::from_vec(vec![idx.len(), self.patch, self.patch, self.bands, 1], data)?;
        Ok((x, labels))
    }
}

/// One epoch's record in the training history.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub train_oa: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochStats>,
}

/// Argmax with ties broken toward the lower class index.
pub fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate().skip(1) {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

fn numeric_context(e: Error, epoch: usize, batch: usize, lr: f64) -> Error {
    match e {
        Error::Numeric(msg) => Error::Numeric(format!(
            "epoch {epoch}, batch {batch}, lr {lr:.3e}: {msg}"
        )),
        other => other,
    }
}

/// One forward/backward pass: accumulates `loss_scale`-weighted gradients
/// into the model tensors and reports (mean loss, argmax hits).
fn train_step<T: Scalar>(
    model: &mut Model<T>,
    x: &Tensor<T>,
    labels: &[usize],
    loss_scale: f64,
) -> Result<(f64, usize)> {
    let mut tape = Tape::new();
    let xv = tape.leaf(x)?;
    let vars = model.bind(&mut tape, true)?;
    let logits = forward(&mut tape, &model.config, &vars, xv)?;
    let loss = tape.cross_entropy(logits, labels)?;
    let scaled = tape.scale(loss, loss_scale)?;
    let mut grads = tape.backward(scaled)?;

    let mut hits = 0;
    for (row, &want) in tape.value(logits).chunks_exact(model.config.num_classes).zip(labels) {
        if argmax(row) == want {
            hits += 1;
        }
    }
    let loss_val = tape
        .scalar(loss)?
        .to_f64()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::numeric("loss is not finite"))?;
    model.absorb_grads(&vars, &mut grads)?;
    Ok((loss_val, hits))
}

/// Seeded mini-batch training with cross-entropy loss, AdamW, and the
/// warmup+cosine schedule. Batches larger than `micro_batch` (when set)
/// are split into fixed sub-passes whose gradients accumulate before the
/// single optimizer step, bounding peak memory without changing the seed
/// contract. Returns per-epoch loss / train OA / last lr.
pub fn train<T: Scalar>(
    model: &mut Model<T>,
    data: &PatchSet,
    cfg: &TrainConfig,
) -> Result<History> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::data("training set is empty"));
    }
    if data.classes != model.config.num_classes {
        return Err(Error::config(format!(
            "{} data classes vs {} model classes",
            data.classes, model.config.num_classes
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
            let micro = if cfg.micro_batch == 0 { chunk.len() } else { cfg.micro_batch };
            for part in chunk.chunks(micro) {
                let (x, labels) = data.batch::<T>(part)?;
                // Scale so micro-batch gradients sum to the full-batch mean.
                let scale = part.len() as f64 / chunk.len() as f64;
                let (loss_val, batch_hits) = train_step(model, &x, &labels, scale)
                    .map_err(|e| numeric_context(e, epoch, batch_no, lr))?;
                loss_sum += loss_val * part.len() as f64;
                hits += batch_hits;
            }
            opt.apply(model, lr, cfg.weight_decay)
                .map_err(|e| numeric_context(e, epoch, batch_no, lr))?;
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

/// Predicted class per sample, in set order. Ties in the logits resolve to
/// the lower class index.
pub fn predict<T: Scalar>(model: &Model<T>, data: &PatchSet, batch: usize) -> Result<Vec<usize>> {
    if batch == 0 {
        return Err(Error::usage("evaluation batch must be >= 1"));
    }
    if data.classes != model.config.num_classes {
        return Err(Error::config(format!(
            "{} data classes vs {} model classes",
            data.classes, model.config.num_classes
        )));
    }
    let mut preds = Vec::with_capacity(data.len());
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(batch) {
        let (x, _) = data.batch::<T>(chunk)?;
        let mut tape = Tape::new();
        let xv = tape.leaf(&x)?;
        let vars = model.bind(&mut tape, false)?;
        let logits = forward(&mut tape, &model.config, &vars, xv)?;
        preds.extend(tape.value(logits).chunks_exact(data.classes).map(argmax));
    }
    Ok(preds)
}

/// Runs the model over a labeled set and tallies the confusion matrix.
pub fn evaluate<T: Scalar>(
    model: &Model<T>,
    data: &PatchSet,
    batch: usize,
) -> Result<ConfusionMatrix> {
    let preds = predict(model, data, batch)?;
    let mut cm = ConfusionMatrix::new(data.classes);
    for (&want, got) in data.y.iter().zip(preds) {
        cm.record(want, got);
    }
    Ok(cm)
}

/// One run's headline metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub oa: f64,
    pub aa: f64,
    pub kappa: f64,
}

/// Mean and sample standard deviation over repeated seeded runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub seeds: Vec<u64>,
    pub runs: Vec<RunSummary>,
    pub mean: RunSummary,
    pub std: RunSummary,
}

/// Repeats an experiment with seeds `base_seed..base_seed+n` and reports
/// mean ± sample std (std 0 when n == 1).
pub fn repeat_runs(
    n: usize,
    base_seed: u64,
    mut experiment: impl FnMut(u64) -> Result<RunSummary>,
) -> Result<MetricsReport> {
    if n == 0 {
        return Err(Error::usage("need at least one run"));
    }
    let seeds: Vec<u64> = (0..n as u64).map(|i| base_seed + i).collect();
    let mut runs = Vec::with_capacity(n);
    for &s in &seeds {
        runs.push(experiment(s)?);
    }
    let pick = |f: fn(&RunSummary) -> f64| -> (f64, f64) {
        let mean = runs.iter().map(&f).sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (runs.iter().map(|r| (f(r) - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        (mean, std)
    };
    let (oa_m, oa_s) = pick(|r| r.oa);
    let (aa_m, aa_s) = pick(|r| r.aa);
    let (k_m, k_s) = pick(|r| r.kappa);
    Ok(MetricsReport {
        seeds,
        runs,
        mean: RunSummary { oa: oa_m, aa: aa_m, kappa: k_m },
        std: RunSummary { oa: oa_s, aa: aa_s, kappa: k_s },
    })
}

/// Convenience: evaluate and summarize in one call.
pub fn summarize<T: Scalar>(
    model: &Model<T>,
    data: &PatchSet,
    batch: usize,
) -> Result<(ConfusionMatrix, RunSummary)> {
    let cm = evaluate(model, data, batch)?;
    let summary = RunSummary { oa: oa(&cm)?, aa: aa(&cm)?, kappa: kappa(&cm)? };
    Ok((cm, summary))
}
