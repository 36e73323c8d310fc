//! Training hyperparameters and the learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn d_epochs() -> usize {
    300
}
fn d_batch() -> usize {
    96
}
fn d_base_lr() -> f64 {
    1e-3
}
fn d_min_lr() -> f64 {
    1e-6
}
fn d_weight_decay() -> f64 {
    1e-5
}
fn d_warmup_epochs() -> usize {
    5
}

/// Optimization settings. Defaults follow the training protocol; tuning
/// runs typically shrink `batch` (12) and `epochs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default = "d_batch")]
    pub batch: usize,
    /// Split every optimizer batch into forward passes of at most this
    /// many samples (0 = whole batch at once); bounds peak memory.
    #[serde(default)]
    pub micro_batch: usize,
    #[serde(default = "d_base_lr")]
    pub base_lr: f64,
    #[serde(default = "d_min_lr")]
    pub min_lr: f64,
    #[serde(default = "d_weight_decay")]
    pub weight_decay: f64,
    #[serde(default = "d_warmup_epochs")]
    pub warmup_epochs: usize,
    #[serde(default)]
    pub seed: u64,
    /// Stop once the running train OA reaches this value, if set.
    #[serde(default)]
    pub stop_at_train_oa: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: d_epochs(),
            batch: d_batch(),
            micro_batch: 0,
            base_lr: d_base_lr(),
            min_lr: d_min_lr(),
            weight_decay: d_weight_decay(),
            warmup_epochs: d_warmup_epochs(),
            seed: 0,
            stop_at_train_oa: None,
        }
    }
}

impl TrainConfig {
    /// Preset for transfer tuning: small batches suit the few-shot regime.
    pub fn tuning() -> Self {
        TrainConfig { batch: 12, ..TrainConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch == 0 {
            return Err(Error::config("epochs and batch must be >= 1"));
        }
        if !(self.base_lr.is_finite() && self.min_lr.is_finite() && self.base_lr > 0.0) {
            return Err(Error::config("learning rates must be finite and positive"));
        }
        if self.min_lr > self.base_lr {
            return Err(Error::config(format!(
                "min_lr {} exceeds base_lr {}",
                self.min_lr, self.base_lr
            )));
        }
        if self.warmup_epochs >= self.epochs {
            return Err(Error::config(format!(
                "warmup ({} epochs) must be shorter than the run ({} epochs)",
                self.warmup_epochs, self.epochs
            )));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::config("weight decay must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Step-indexed learning-rate schedule: linear warmup from 0 to `base_lr`,
/// then cosine decay that lands exactly on `min_lr` at the last step.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub warmup_steps: usize,
    pub total_steps: usize,
    pub base_lr: f64,
    pub min_lr: f64,
}

impl Schedule {
    pub fn new(cfg: &TrainConfig, steps_per_epoch: usize) -> Result<Self> {
        cfg.validate()?;
        if steps_per_epoch == 0 {
            return Err(Error::config("schedule needs >= 1 step per epoch"));
        }
        Ok(Schedule {
            warmup_steps: cfg.warmup_epochs * steps_per_epoch,
            total_steps: cfg.epochs * steps_per_epoch,
            base_lr: cfg.base_lr,
            min_lr: cfg.min_lr,
        })
    }

    /// Learning rate at `step` (0-based). The warmup line `base·s/warmup`
    /// meets the cosine branch exactly at `base_lr`; the final step is
    /// exactly `min_lr`.
    pub fn lr_at(&self, step: usize) -> f64 {
        if step < self.warmup_steps {
            return self.base_lr * step as f64 / self.warmup_steps as f64;
        }
        let last = self.total_steps - 1;
        if step >= last {
            return self.min_lr;
        }
        if step == self.warmup_steps {
            return self.base_lr;
        }
        let span = (last - self.warmup_steps) as f64;
        let t = (step - self.warmup_steps) as f64 / span;
        self.min_lr + 0.5 * (self.base_lr - self.min_lr) * (1.0 + (std::f64::consts::PI * t).cos())
    }
}
