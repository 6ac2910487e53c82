//! `ttm`: generate process models, simulate them, train and query HMMs,
//! forecast time to market and run density sweeps.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use ttm_core::Error;

#[derive(Parser)]
#[command(name = "ttm", version, about = "Simulation-trained HMMs for time-to-market forecasting")]
struct Cli {
    /// Maximum number of worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command.
#[derive(Args, Serialize, Debug, Clone)]
pub struct Common {
    /// JSON config file with a "command" field; flags override its values.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file (directory for sweep). Printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random process model.
    Generate(commands::GenerateArgs),
    /// Simulate a model, optionally writing noisy observations of the first run.
    Simulate(commands::SimulateArgs),
    /// Build an HMM from simulated or supplied traces.
    Train(commands::TrainArgs),
    /// Decode an observation sequence with Viterbi and score it with Forward.
    Infer(commands::InferArgs),
    /// Forecast remaining time from an observation sequence.
    Predict(commands::PredictArgs),
    /// Run a density sweep and write success curves.
    Sweep(commands::SweepArgs),
}

/// A failed invocation: message plus process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

pub const EXIT_INVALID: u8 = 2;
pub const EXIT_UNDER_SAMPLED: u8 = 3;
pub const EXIT_DECODE: u8 = 4;
pub const EXIT_IO: u8 = 5;

impl Failure {
    pub fn invalid(message: impl Into<String>) -> Self {
        Failure { code: EXIT_INVALID, message: message.into() }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Failure { code: EXIT_IO, message: format!("{}: {e}", path.display()) }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.root() {
            Error::UnderSampled { .. } => EXIT_UNDER_SAMPLED,
            Error::NoViablePath { .. } => EXIT_DECODE,
            Error::Io { .. } => EXIT_IO,
            Error::Json { source, .. } if source.is_io() => EXIT_IO,
            Error::Csv { source, .. } if source.is_io_error() => EXIT_IO,
            _ => EXIT_INVALID,
        };
        Failure { code, message: e.to_string() }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(workers) = cli.workers {
        if workers == 0 {
            return Err(Failure::invalid("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| Failure::invalid(format!("worker pool: {e}")))?;
    }
    match cli.command {
        Command::Generate(args) => commands::generate(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::Train(args) => commands::train(args),
        Command::Infer(args) => commands::infer(args),
        Command::Predict(args) => commands::predict(args),
        Command::Sweep(args) => commands::sweep(args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
