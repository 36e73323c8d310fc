//! `triformer`: data generation, training, transfer tuning, evaluation,
//! cost reporting, and RGB conversion from one binary.
//!
//! Conventions: machine-readable results are a single JSON document on
//! stdout; human diagnostics go to stderr. Exit codes: 0 success, 1 usage,
//! 2 data/format problems, 3 numeric divergence.

mod ops;

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use triformer::Error;

const THREADS_VAR: &str = "TRIFORMER_THREADS";

#[derive(Parser)]
#[command(
    name = "triformer",
    version,
    about = "Hyperspectral classification and cross-sensor transfer tuning",
    after_help = "Environment:\n  TRIFORMER_THREADS  caps worker threads (>= 1). Compute kernels are\n                     single-threaded today, so any valid cap is honored."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a paired-sensor synthetic scene as HSC cubes.
    GenData(GenDataArgs),
    /// Train a classifier on a labeled HSC cube.
    Train(TrainArgs),
    /// Transfer-tune a pretrained checkpoint onto a new cube.
    Tune(TuneArgs),
    /// Score a checkpoint and optionally render a classification map.
    Eval(EvalArgs),
    /// Report analytic vs measured MAC counts for a configuration.
    Flops(FlopsArgs),
    /// Convert an RGB PNG into a 32-band pseudo-hyperspectral cube.
    ConvertRgb(ConvertRgbArgs),
}

#[derive(Args)]
pub struct GenDataArgs {
    /// Scene spec JSON; omitted = generator defaults.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for sensorA.hsc, sensorB.hsc, spec.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Run config JSON (sections: model, train, split). Unknown keys are
    /// rejected; zero model bands/classes are filled from the data.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Labeled HSC cube.
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint to write; the epoch log goes to <out>.history.jsonl.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config epoch count.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Overrides the per-class training pixel count.
    #[arg(long)]
    pub per_class: Option<usize>,
}

#[derive(Args)]
pub struct TuneArgs {
    /// Pretrained base checkpoint (TFCK).
    #[arg(long)]
    pub base: PathBuf,
    /// Run config JSON (sections: sdt, tune).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Labeled HSC cube from the target sensor.
    #[arg(long)]
    pub data: PathBuf,
    /// Labeled tuning pixels per class.
    #[arg(long, default_value_t = 25)]
    pub n_per_class: usize,
    /// Seeded repetitions averaged in the report.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Overrides the tuning seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the base step-size fraction (0 freezes the base).
    #[arg(long)]
    pub cold_factor: Option<f64>,
    /// Overrides the tuning epoch count.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Dual archive to write (TFCD).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Model checkpoint (TFCK) or dual archive (TFCD); sniffed by magic.
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Labeled HSC cube.
    #[arg(long)]
    pub data: PathBuf,
    /// Classification map PNG (8-bit indexed; unlabeled pixels black).
    #[arg(long)]
    pub map_out: Option<PathBuf>,
    /// Evaluation batch size.
    #[arg(long, default_value_t = 64)]
    pub batch: usize,
}

#[derive(Args)]
pub struct FlopsArgs {
    /// Run config JSON (section: model); omitted = default architecture.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Post-stem feature extents as HxWxL, e.g. 9x9x16.
    #[arg(long)]
    pub extents: String,
    /// Seed for the measurement input.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct ConvertRgbArgs {
    /// Source PNG (8-bit RGB, RGBA, or grayscale).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// HSC cube to write (labels all zero).
    #[arg(long)]
    pub out: PathBuf,
}

/// `TRIFORMER_THREADS` must be a positive integer when set. Today all
/// kernels are single-threaded, so every valid cap is trivially honored.
fn check_threads() -> Result<(), String> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(()),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(()),
            _ => Err(format!("{THREADS_VAR} must be a positive integer, got {v:?}")),
        },
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) => 1,
        Error::Numeric(_) => 3,
        _ => 2,
    }
}

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let benign =
                matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if benign { 0 } else { 1 };
        }
    };
    if let Err(msg) = check_threads() {
        eprintln!("error: {msg}");
        return 1;
    }
    let result = match cli.cmd {
        Cmd::GenData(a) => ops::gen_data(&a),
        Cmd::Train(a) => ops::train(&a),
        Cmd::Tune(a) => ops::tune(&a),
        Cmd::Eval(a) => ops::eval(&a),
        Cmd::Flops(a) => ops::flops(&a),
        Cmd::ConvertRgb(a) => ops::convert_rgb(&a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
