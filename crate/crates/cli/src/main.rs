#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;
mod output;

use config::{Overrides, RunConfig};
use error::{CliError, EXIT_USAGE};

/// Spectral gaps of reversible Markov semigroups and the L^p decay bounds
/// derived from them.
#[derive(Debug, Parser)]
#[command(name = "semigap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// `ou` or `grid` (with default parameters).
    #[arg(long, global = true)]
    backend: Option<String>,
    /// Comma-separated exponents.
    #[arg(long, global = true, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    #[arg(long, global = true)]
    slack: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Spectral gap and Poincaré constant; writes rates.csv.
    Gap,
    /// Decay bounds per exponent; writes bounds.json, dominance.json, c_recursion.json.
    Bounds,
    /// Decay curves of a test family; writes curves.csv.
    Evolve,
    /// Full check suite; writes report.json and report.csv.
    Verify,
    /// Observed and bounded rates across grid sizes or exponents; writes sweep.csv.
    Sweep,
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out,
        backend: cli.backend,
        p: cli.p,
        slack: cli.slack,
    };
    let (cfg, base) = RunConfig::load(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Gap => commands::gap(&cfg, &base),
        Command::Bounds => commands::bounds(&cfg, &base),
        Command::Evolve => commands::evolve(&cfg, &base),
        Command::Verify => commands::verify(&cfg, &base),
        Command::Sweep => commands::sweep(&cfg, &base),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("semigap: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
