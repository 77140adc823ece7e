//! `sdelab`: config-driven runner for simulation, MMSE/MI estimation,
//! identity verification and SNR classification.
//!
//! Exit codes: 0 success, 1 an identity failed verification, 2 config error,
//! 3 unsupported input model, 4 every replicate aborted, 5 results missing
//! for `plotdata`, 6 I/O or other runtime failure.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use commands::{cmd_classify, cmd_plotdata, cmd_run, cmd_verify};
pub use config::{ExperimentConfig, GridConfig, Overrides};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_UNSUPPORTED: i32 = 3;
pub const EXIT_ALL_ABORTED: i32 = 4;
pub const EXIT_MISSING_RESULTS: i32 = 5;
pub const EXIT_RUNTIME: i32 = 6;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Core(#[from] sdelab_core::Error),

    #[error("missing results: {} not found (run `sdelab run` first)", .0.display())]
    MissingResults(PathBuf),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use sdelab_core::Error as E;
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            CliError::Core(E::InvalidSpec(_) | E::InvalidGrid(_) | E::InvalidModel(_)) => EXIT_CONFIG,
            CliError::Core(E::UnsupportedInput(_)) => EXIT_UNSUPPORTED,
            CliError::Core(E::TooFewReplicates(_)) => EXIT_ALL_ABORTED,
            CliError::MissingResults(_) => EXIT_MISSING_RESULTS,
            CliError::Core(_) | CliError::Io { .. } => EXIT_RUNTIME,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sdelab", version, about = "MMSE / mutual-information lab for dY = sqrt(r) F dt + G dW")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory override.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Replicate count override.
    #[arg(long, global = true)]
    pub replicates: Option<usize>,
    /// Worker threads; results are identical for any value.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Estimate MMSE surfaces and MI curves.
    Run,
    /// Check the identity residuals; exit 1 if any applicable one fails.
    Verify,
    /// Probe the SNR class.
    Classify,
    /// Write plot series from existing results.
    Plotdata,
}

impl Cli {
    pub fn load_config(&self) -> Result<ExperimentConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        config.apply(&Overrides { seed: self.seed, out: self.out.clone(), replicates: self.replicates, workers: self.workers })?;
        Ok(config)
    }

    pub fn execute(&self) -> Result<i32, CliError> {
        let config = self.load_config()?;
        match self.command {
            Command::Run => cmd_run(&config, self.quiet).map(|_| EXIT_OK),
            Command::Verify => cmd_verify(&config, self.quiet).map(|v| if v.report.passed { EXIT_OK } else { EXIT_VERIFY_FAILED }),
            Command::Classify => cmd_classify(&config, self.quiet).map(|_| EXIT_OK),
            Command::Plotdata => cmd_plotdata(&config, self.quiet).map(|_| EXIT_OK),
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Errors go to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match cli.execute() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("sdelab: {e}");
            e.exit_code()
        }
    }
}
