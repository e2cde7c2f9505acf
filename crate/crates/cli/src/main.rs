//! `qha-lab`: command-line front end of the concentration laboratory.
//!
//! Exit codes: 0 on success, 1 when an experiment or oracle misses its tolerance (reports
//! are still written) or on a numerical or write failure, 2 on a usage or validation error.

mod commands;
mod config;
mod format;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qha_lab::LabError;

use crate::commands::{
    ExperimentArgs, GapArgs, OpOptimizeArgs, OptimizeArgs, OracleArgs, TransformArgs,
};

#[derive(Debug, Parser)]
#[command(
    name = "qha-lab",
    version,
    about = "Cohen-class concentration laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write Q_S f, Af, a Weyl symbol or a Fourier–Wigner transform as long-form CSV.
    Transform(TransformArgs),
    /// Maximize the signal-level concentration functional.
    Optimize(OptimizeArgs),
    /// Maximize operator-level concentration for one operator class.
    OpOptimize(OpOptimizeArgs),
    /// Gap-criterion tables and verdicts for the Wigner window on balls.
    Gap(GapArgs),
    /// Run named reproduction experiments.
    Experiment(ExperimentArgs),
    /// Run the identity suite and print residuals.
    Oracle(OracleArgs),
}

/// A failed run: exit code plus diagnostic.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn validation(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    pub fn tolerance(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        Failure {
            code: if e.is_validation() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Transform(args) => commands::transform(args),
        Command::Optimize(args) => commands::optimize(args),
        Command::OpOptimize(args) => commands::op_optimize(args),
        Command::Gap(args) => commands::gap(args),
        Command::Experiment(args) => commands::experiment(args),
        Command::Oracle(args) => commands::oracle(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
