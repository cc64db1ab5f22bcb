//! `sublinpot`: solve, check, verify and sweep sublinear potential equations.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 non-convergence,
//! 3 condition violated.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    NotConverged(String),
    Violated(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::NotConverged(_) => 2,
            CliError::Violated(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::NotConverged(m) | CliError::Violated(m) => m,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "sublinpot",
    version,
    about = "Sublinear equations with potential-type kernels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    Gamma,
    Q,
    Alpha,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimal solution by monotone iteration; writes the solution and reports to out_dir.
    Solve { config: PathBuf },
    /// Condition integrals, exponents and Lorentz norms of the data.
    Check { config: PathBuf },
    /// Checks the estimates against the solution written by `solve`.
    Verify {
        config: PathBuf,
        #[arg(long)]
        estimates: bool,
        #[arg(long)]
        energy: bool,
        #[arg(long = "kernel-axioms")]
        kernel_axioms: bool,
    },
    /// One CSV row per parameter value.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
    },
    /// Writes a config and data files for a built-in problem.
    MakeFixture {
        /// two-term, one-term, scalar or green-ball
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("RS_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        CliError::Config(format!(
            "RS_THREADS: expected a positive integer, got `{v}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("RS_THREADS: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Solve { config } => commands::solve(&config),
        Command::Check { config } => commands::check(&config),
        Command::Verify {
            config,
            estimates,
            energy,
            kernel_axioms,
        } => {
            let all = !(estimates || energy || kernel_axioms);
            commands::verify(
                &config,
                estimates || all,
                energy || all,
                kernel_axioms || all,
                all,
            )
        }
        Command::Sweep {
            config,
            param,
            values,
        } => commands::sweep(&config, param, &values),
        Command::MakeFixture { name, out } => commands::make_fixture(&name, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
