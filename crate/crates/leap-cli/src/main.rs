//! `leap` — meta-learn initializations by shortening gradient descent
//! paths across a task distribution.
//!
//! Subcommands: `train` (meta-training + checkpoints), `evaluate` (transfer
//! to held-out tasks), `verify` (self-contained correctness suites) and
//! `ablate` (the geometry ablation grid). Exit codes: 0 on success, 2 for
//! configuration and I/O problems, 3 for numerical failures (including
//! failing verification suites). Log verbosity comes from the `LEAP_LOG`
//! environment variable (`error` by default).

mod commands;
mod config;

use clap::{Parser, Subcommand};
use config::ExperimentConfig;
use leap::error::LeapError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "leap",
    version,
    about = "Meta-learning of initializations via gradient-path geometry"
)]
struct Cli {
    /// Worker threads for data-parallel sections (0 keeps the default pool).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Meta-train all configured methods; writes history.csv and checkpoints.
    Train {
        /// Experiment TOML file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Restrict the run to one seed from the configured list.
        #[arg(long)]
        seed: Option<u64>,
        /// Accumulate meta gradients during the walk instead of storing paths.
        #[arg(long)]
        streaming: bool,
    },
    /// Adapt trained initializations to held-out tasks; writes records.csv
    /// and summary.csv.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        /// Directory holding checkpoints from `train`; also receives output.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run verification suites; prints one JSON report per suite.
    Verify {
        /// Single suite name (default: run all).
        #[arg(long)]
        suite: Option<String>,
    },
    /// Run the metric × loss-coordinate × stabilizer ablation grid.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code_for(error: &LeapError) -> u8 {
    match error {
        LeapError::Config(_)
        | LeapError::Unsupported(_)
        | LeapError::Checkpoint(_)
        | LeapError::Io(_) => 2,
        _ => 3,
    }
}

fn run(cli: Cli) -> Result<u8, LeapError> {
    leap::execution::configure_threads(cli.threads);
    match cli.command {
        Command::Train {
            config,
            out,
            seed,
            streaming,
        } => {
            let config = ExperimentConfig::load(&config)?;
            commands::cmd_train(&config, &out, seed, streaming)?;
            Ok(0)
        }
        Command::Evaluate { config, out, seed } => {
            let config = ExperimentConfig::load(&config)?;
            commands::cmd_evaluate(&config, &out, seed)?;
            Ok(0)
        }
        Command::Verify { suite } => {
            let all_passed = commands::cmd_verify(suite.as_deref())?;
            Ok(if all_passed { 0 } else { 3 })
        }
        Command::Ablate { config, out } => {
            let config = ExperimentConfig::load(&config)?;
            commands::cmd_ablate(&config, &out)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("LEAP_LOG", "error")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(exit_code_for(&error))
        }
    }
}
