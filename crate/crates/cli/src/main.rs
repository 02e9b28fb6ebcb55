//! Batch front door: parse a JSON run config, orchestrate solve/analyze
//! pipelines and parameter sweeps, and emit deterministic CSV/JSON artifacts.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::CmdError;
use config::{load_config, Format};

#[derive(Parser)]
#[command(
    name = "groundstate",
    about = "Radial ground states of -Δu = v^p u^r, -Δv = u^q v^s: classify, solve, verify, sweep",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's output.directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Parallelism for sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Restrict artifact formats.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand)]
enum Command {
    /// Derive the scaling pair, regime, profiles, and constants.
    Classify,
    /// Compute a ground state and write u/v fields plus diagnostics.
    Solve,
    /// Run the configured check suite against a fresh or loaded state.
    Verify,
    /// Cartesian parameter sweep with one scaling-report row per tuple.
    Sweep,
    /// Newton potential of a stored field (CSV/JSON pair stem).
    Potential { field: PathBuf },
}

fn run(cli: &Cli) -> Result<(), CmdError> {
    if let Command::Potential { field } = &cli.command {
        return commands::cmd_potential(field, &cli.out);
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CmdError::Invalid("--config PATH is required".into()))?;
    let config = load_config(path).map_err(CmdError::Invalid)?;
    match &cli.command {
        Command::Classify => commands::cmd_classify(&config, &cli.out, cli.format),
        Command::Solve => commands::cmd_solve(&config, &cli.out, cli.format),
        Command::Verify => commands::cmd_verify(&config, &cli.out, cli.format),
        Command::Sweep => commands::cmd_sweep(&config, &cli.out, cli.format, cli.jobs),
        Command::Potential { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            match &err {
                CmdError::ChecksFailed => eprintln!("error: one or more checks failed"),
                CmdError::Invalid(msg) => eprintln!("error: {msg}"),
                CmdError::SolverFailed(msg) => eprintln!("error: {msg}"),
            }
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
