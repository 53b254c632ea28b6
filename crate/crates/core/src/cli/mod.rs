//! The `harmonic` command line.
//!
//! Settings resolve in three layers: built-in defaults, then `--config`
//! files in order, then `--set key=value` overrides and the dedicated flags.
//! Every command writes the resolved configuration next to its outputs.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

mod artifact;
mod commands;
mod config;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::neural::ModelKind;

pub use artifact::{BundleMember, EnsembleBundle, BUNDLE_MAGIC, BUNDLE_VERSION};
pub use config::{EnsembleSettings, PipelineConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelChoice {
    DenseMlp,
    LstmOnly,
    LstmDense,
    GruDense,
    Seq2seq,
    /// One forest per harmonic order, all three in one artifact.
    RandomForest,
    /// One booster for the selected order.
    GradientBooster,
    /// Forest on lines 1 and 2, booster on line 3.
    Ensemble,
}

impl ModelChoice {
    pub fn neural_kind(self) -> Option<ModelKind> {
        match self {
            ModelChoice::DenseMlp => Some(ModelKind::DenseMlp),
            ModelChoice::LstmOnly => Some(ModelKind::LstmOnly),
            ModelChoice::LstmDense => Some(ModelKind::LstmDense),
            ModelChoice::GruDense => Some(ModelKind::GruDense),
            ModelChoice::Seq2seq => Some(ModelKind::Seq2Seq),
            _ => None,
        }
    }
}

impl fmt::Display for ModelChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.to_possible_value().expect("no skipped variants");
        f.write_str(v.get_name())
    }
}

impl FromStr for ModelChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        <ModelChoice as ValueEnum>::from_str(s, true).map_err(|_| {
            let names: Vec<String> = ModelChoice::value_variants().iter().map(|m| m.to_string()).collect();
            Error::Config(format!("unknown model {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "harmonic", version, about = "Harmonic forecasting, THD analysis and active-filter simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct ConfigArgs {
    /// Plain-text `key = value` config file; may be repeated.
    #[arg(long = "config", value_name = "FILE")]
    pub config: Vec<PathBuf>,
    /// Override one config key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic raw analyzer CSV.
    Synth {
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        days: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Clean a raw CSV and write the analysis report bundle.
    Analyze {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Train a model and write its checkpoint and training log.
    Train {
        #[arg(long)]
        model: Option<ModelChoice>,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..=3))]
        line: Option<u32>,
        #[arg(long, value_parser = ["3", "5", "7"])]
        order: Option<String>,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Score checkpoints on the test split and write error reports plus a
    /// feature CSV for the simulator.
    Evaluate {
        /// Neural checkpoint or ensemble artifact; may be repeated.
        #[arg(long)]
        checkpoint: Vec<PathBuf>,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run the active-filter simulation over a feature CSV.
    Simulate {
        #[arg(long)]
        features: Option<PathBuf>,
        /// Only simulate this line.
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..=3))]
        line: Option<u32>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Messages go to stdout, errors to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match commands::execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

/// `974849` → `974,849`.
pub fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}
