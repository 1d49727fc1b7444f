//! `lrhist`: command-line front end for low-rank histogram estimation.

mod bounds;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lowrank_hist::Error;
use thiserror::Error as ThisError;

#[derive(Debug, Parser)]
#[command(name = "lrhist", version, about = "Low-rank histogram density estimation")]
pub struct Cli {
    /// Size of the worker pool; defaults to one thread per core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Print JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Also write the JSON result to this file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Master seed; required by fit, cv, experiment and rate-bench.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a standard or low-rank histogram to a CSV of points in [0,1)^d.
    Fit(commands::FitArgs),
    /// Empirical L2 risk of a stored density on a CSV of points.
    Risk(commands::RiskArgs),
    /// Cross-validate bins and rank on a CSV of points.
    Cv(commands::CvArgs),
    /// Run a paired comparison experiment from a JSON config.
    Experiment(commands::ExperimentArgs),
    /// Build an eps-cover and pick a member with the Scheffé tournament.
    CoverSelect(commands::CoverSelectArgs),
    /// Evaluate a named closed-form bound (`bounds list` shows them all).
    Bounds(bounds::BoundsArgs),
    /// Measure L1 error against sample size for a separable density.
    RateBench(commands::RateBenchArgs),
    /// Re-render a stored experiment or rate-bench JSON result.
    Report(commands::ReportArgs),
}

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 runtime failure, 2 invalid input, 3 resource cap.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::Resource { .. }) => 3,
            CliError::Core(_) | CliError::Usage(_) => 2,
            CliError::Write { .. } => 1,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
