//! Command-line entry point: one JSON configuration file per run.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use unirec_core::error::Error;

#[derive(Parser)]
#[command(
    name = "unirec",
    version,
    about = "Heterogeneous recommendation with unified item representations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and write it to disk.
    Synth { config: PathBuf },
    /// Train the full model: alignment + topology + classification.
    Train { config: PathBuf },
    /// Train with the alignment and topology terms removed.
    TrainAblate { config: PathBuf },
    /// Evaluate a checkpoint on the test split.
    Eval { config: PathBuf },
    /// Evaluate on the test interactions of cold-designated users.
    ColdEval { config: PathBuf },
    /// Compare clustering fidelity of two checkpoints (with/without the
    /// topology term).
    TopoF1 { config: PathBuf },
    /// Export unified item representations and a cross-kind similarity
    /// matrix.
    Export { config: PathBuf },
    /// Run the built-in oracle and gradient-check suites.
    OracleCheck {
        /// Accepted for interface uniformity; the suites are self-contained.
        config: Option<PathBuf>,
    },
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Synth { config } => commands::synth(&RunConfig::load(&config)?),
        Command::Train { config } => commands::train(&RunConfig::load(&config)?, false),
        Command::TrainAblate { config } => commands::train(&RunConfig::load(&config)?, true),
        Command::Eval { config } => commands::eval(&RunConfig::load(&config)?, false),
        Command::ColdEval { config } => commands::eval(&RunConfig::load(&config)?, true),
        Command::TopoF1 { config } => commands::topo_f1(&RunConfig::load(&config)?),
        Command::Export { config } => commands::export(&RunConfig::load(&config)?),
        Command::OracleCheck { config } => {
            if let Some(path) = config {
                // validated for well-formedness even though the suites take
                // no parameters
                RunConfig::load(&path)?;
            }
            commands::oracle_check()
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version through this path too
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
