//! `lielag`: solve, verify and inspect discrete Lagrange problems on SO(n).
//!
//! Exit codes: 0 success, 1 verification or convergence failure, 2 usage,
//! configuration or input error.

mod commands;
mod config;
mod report;
mod suites;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{Overrides, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, configuration or input files.
    #[error("{0}")]
    Usage(String),
    /// A computation ran but a check or the solver failed.
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Usage(format!("{}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Failure(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

impl From<lielag::Error> for CliError {
    fn from(e: lielag::Error) -> Self {
        use lielag::Error as E;
        match e {
            E::InvalidArgument(_) | E::Parse { .. } | E::Io(_) => CliError::Usage(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lielag", version, about = "Discrete Lagrange problems with SO(n)-valued constraints")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Split,
    Cartan,
    Flatness,
    Noether,
    Multisymplectic,
    Multipliers,
    Elimination,
    Regularity,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the harmonic-map problem for the configured boundary.
    Solve,
    /// Run one identity suite.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        /// Noether: replace the conjugation field by a random non-symmetry.
        #[arg(long)]
        break_symmetry: bool,
        /// Regularity: let frontier vertices vary too.
        #[arg(long)]
        free_frontier: bool,
    },
    /// Rebuild an unreduced field from a reduced section.
    Reconstruct {
        #[arg(long)]
        section: PathBuf,
        /// Unreduced-field file whose (0, 0) value seeds the reconstruction (identity otherwise).
        #[arg(long)]
        seed_field: Option<PathBuf>,
        /// Output file (default: <output>/field.txt).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recover Lagrange multipliers for a critical reduced section.
    RecoverMultipliers {
        #[arg(long)]
        section: PathBuf,
        /// Seed the max-corner face with a random coalgebra element from this seed (zero otherwise).
        #[arg(long)]
        random_seed: Option<u64>,
        /// Output file (default: <output>/multiplier.txt).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Residual report for a reduced section or an unreduced field.
    Report {
        #[arg(long, conflicts_with = "field", required_unless_present = "field")]
        section: Option<PathBuf>,
        #[arg(long)]
        field: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = RunConfig::load(&cli.overrides)?;
    match cli.command {
        Command::Solve => commands::solve(&config),
        Command::Verify { suite, break_symmetry, free_frontier } => {
            commands::verify(&config, suite, suites::Options { break_symmetry, free_frontier })
        }
        Command::Reconstruct { section, seed_field, out } => {
            commands::reconstruct(&config, &section, seed_field.as_deref(), out.as_deref())
        }
        Command::RecoverMultipliers { section, random_seed, out } => {
            commands::recover(&config, &section, random_seed, out.as_deref())
        }
        Command::Report { section, field } => commands::report(&config, section.as_deref(), field.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
