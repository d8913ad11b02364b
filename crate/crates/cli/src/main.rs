//! `galerkin-rk`: tableau checks, single runs, convergence studies and
//! oracle cross-checks driven by TOML experiment configs.
//!
//! Exit codes: 0 pass, 1 failure, 2 usage or config error, 3 inconclusive.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{CliError, CmdResult};

#[derive(Parser)]
#[command(name = "galerkin-rk", version, about = "Spectral Galerkin / implicit Runge-Kutta experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a tableau with its order conditions and A-stability certificate.
    Tableau(TableauArgs),
    /// Integrate once at a single (h, m).
    Run {
        config: PathBuf,
        /// Compare the final state with the exact semigroup (B linear only).
        #[arg(long)]
        verify_linear: bool,
    },
    /// Run the convergence study selected in the config.
    Study {
        config: PathBuf,
        /// Worker threads for study cells.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        jobs: Option<u64>,
    },
    /// Cross-check the Picard, reference, stage-iteration and dense oracles.
    OracleCheck { config: PathBuf },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct TableauArgs {
    /// Gauss-Legendre with this many stages.
    #[arg(long)]
    gauss: Option<usize>,
    /// Tableau file in the plain-text exchange format.
    #[arg(long)]
    file: Option<PathBuf>,
}

fn load(path: &Path) -> Result<config::Loaded, CliError> {
    config::load(path).map_err(CliError::Usage)
}

fn dispatch(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Tableau(a) => commands::cmd_tableau(a.gauss, a.file.as_deref()),
        Command::Run { config, verify_linear } => commands::cmd_run(&load(&config)?, verify_linear),
        Command::Study { config, jobs } => commands::cmd_study(&load(&config)?, jobs.map(|j| j as usize)),
        Command::OracleCheck { config } => commands::cmd_oracle_check(&load(&config)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("error: {:#}", e.error());
            ExitCode::from(e.code())
        }
    }
}
