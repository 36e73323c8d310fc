//! Optimizer, schedule, metrics, loops, and checkpoints.

pub mod checkpoint;
pub mod config;
pub mod metrics;
pub mod optim;
pub mod run;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::{Schedule, TrainConfig};
pub use metrics::{aa, kappa, oa, ConfusionMatrix};
pub use optim::AdamW;
pub use run::{
    argmax, evaluate, predict, repeat_runs, summarize, train, EpochStats, History,
    MetricsReport, PatchSet, RunSummary,
};
