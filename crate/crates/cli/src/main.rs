//! `dwa`: command-line driver for distance-weighted augmentation experiments.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dwa_core::{DistanceMetric, ErrorClass, SpanKind, Target};

#[derive(Parser)]
#[command(name = "dwa", version, about = "Personalized valence/arousal regression with distance-weighted augmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Corpus directory (manifest.json, features/, labels/)
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// JSON config file; unknown keys are rejected
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub metric: Option<DistanceMetric>,
    /// Augmentation samples per segment
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub target: Option<Target>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus (config: synthetic generator settings)
    Synth,
    /// Train the generic model on the global split
    TrainGeneric,
    /// Write per-individual augmentation reports
    Augment {
        /// Only this Test individual
        #[arg(long)]
        individual: Option<String>,
    },
    /// Fine-tune one model per Test individual
    Personalize {
        /// Generic checkpoint to start from; trained on the fly when absent
        #[arg(long)]
        generic: Option<PathBuf>,
    },
    /// Score a checkpoint on Devel_I or Test and write its predictions
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        individual: Option<String>,
        /// Devel_I or Test
        #[arg(long, default_value = "Devel_I")]
        split: SpanKind,
    },
    /// Late-fuse two prediction files with development-CCC weights
    Fuse {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Development CCC of stream a; computed from its labels when absent
        #[arg(long, allow_hyphen_values = true)]
        dev_a: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        dev_b: Option<f64>,
    },
    /// Run the full metric x n grid
    Experiment,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = cli.common;
    let result = match cli.command {
        Command::Synth => commands::synth(&common),
        Command::TrainGeneric => commands::train_generic(&common),
        Command::Augment { individual } => commands::augment(&common, individual.as_deref()),
        Command::Personalize { generic } => commands::personalize(&common, generic.as_deref()),
        Command::Evaluate {
            checkpoint,
            individual,
            split,
        } => commands::evaluate(&common, &checkpoint, individual.as_deref(), split),
        Command::Fuse { a, b, dev_a, dev_b } => commands::fuse(&common, &a, &b, dev_a, dev_b),
        Command::Experiment => commands::experiment(&common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// A failure with its process exit code.
#[derive(Debug)]
pub enum Failure {
    Core(dwa_core::Error),
    Config(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Core(e) => match e.class() {
                ErrorClass::Config => 2,
                ErrorClass::Data => 3,
                ErrorClass::Numerical => 4,
            },
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Core(e) => e.fmt(f),
            Failure::Config(m) => f.write_str(m),
        }
    }
}

impl From<dwa_core::Error> for Failure {
    fn from(e: dwa_core::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}
