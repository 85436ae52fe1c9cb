//! `majority`: configuration-driven experiments on the three-diffusion
//! allocation problem.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical or i/o failure, 3 a check
//! of the invariant suite failed.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{Command, ExperimentConfig, Format, Overrides};
use error::{CliError, CliResult};
use output::Sink;

#[derive(Debug, Parser)]
#[command(name = "majority", version, about = "Run-the-middle experiments", long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed (overrides the file and the MAJORITY_SEED variable)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Monte Carlo paths per arm
    #[arg(long, global = true)]
    paths: Option<u64>,

    /// Euler time step
    #[arg(long, global = true)]
    step: Option<f64>,

    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Worker threads (default: all cores); never changes the results
    #[arg(long, global = true)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("majority: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if cli.threads == Some(0) {
        return Err(CliError::usage("--threads must be at least 1"));
    }
    let flags = Overrides {
        seed: cli.seed,
        paths: cli.paths,
        step: cli.step,
        out: cli.out,
        format: cli.format,
    };
    let cfg = ExperimentConfig::load(cli.config.as_deref())?.resolve(cli.command, &flags)?;
    let mut sink = Sink::new(&cfg, cli.command)?;
    let result = match cli.command {
        Command::Simulate => commands::simulate::run(&cfg, &mut sink, cli.threads),
        Command::Value => commands::value::run(&cfg, &mut sink),
        Command::Dpbm => commands::dpbm::run(&cfg, &mut sink, cli.threads),
        Command::Tree => commands::tree::run(&cfg, &mut sink),
        Command::Check => commands::check::run(&cfg, &mut sink, cli.threads),
    };
    if !sink.written().is_empty() {
        println!("{}", output::display(sink.written()));
    }
    result
}
