//! `kbl`: batch experiments for Brownian particles with mean-field killing.
//!
//! Exit codes: 0 pass, 1 check failure, 2 configuration error, 3 numeric error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kbl_core::KblError;

use crate::commands::Command;
use crate::config::ExperimentConfig;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
}

impl From<KblError> for CliError {
    fn from(e: KblError) -> Self {
        match e {
            KblError::Config(_) | KblError::Domain(_) => CliError::Config(e.to_string()),
            KblError::Numeric(_) | KblError::NonConvergence { .. } => CliError::Numeric(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "kbl", version, about = "Brownian particles with mean-field killing")]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    /// Experiment file (TOML); built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Overrides `run.seed`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Directory for CSV output.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// Validate the configuration and print the plan without computing.
    #[arg(long, global = true)]
    dry_run: bool,

    /// Overrides `run.workers`.
    #[arg(long, global = true, value_name = "N", env = "KBL_WORKERS")]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Sub {
    /// Compare the particle mass path with its deterministic limit.
    LlnCheck,
    /// Simulate (optionally controlled) replicas and write their paths.
    Simulate,
    /// Solve the self-consistent survival equation for a sampled control law.
    FixedPoint,
    /// Rate-function certificates over a control family.
    RateFrontier,
    /// Laplace functional: Monte Carlo against controlled upper bounds.
    LaplaceCompare,
    /// Quadrature check of the single-particle variational representation.
    VarrepCheck,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::LlnCheck => Command::LlnCheck,
            Sub::Simulate => Command::Simulate,
            Sub::FixedPoint => Command::FixedPoint,
            Sub::RateFrontier => Command::RateFrontier,
            Sub::LaplaceCompare => Command::LaplaceCompare,
            Sub::VarrepCheck => Command::VarrepCheck,
        }
    }
}

fn execute(cli: &Cli, cmd: Command) -> Result<bool, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    if let Some(w) = cli.workers {
        cfg.run.workers = w;
    }
    cmd.validate(&cfg)?;
    if cli.dry_run {
        println!("# {} (dry run)", cmd.name());
        println!("# outputs: {}", cmd.outputs(&cfg).iter().map(|f| cli.out.join(f).display().to_string()).collect::<Vec<_>>().join(", "));
        print!("{}", cfg.to_toml());
        return Ok(true);
    }
    let workers = cfg.run.workers;
    kbl_core::sim::with_workers(workers, || cmd.run(&cfg, &cli.out))?
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cmd = Command::from(cli.command);
    match execute(&cli, cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Config(m)) => {
            eprintln!("{}: {m}", cmd.name());
            ExitCode::from(2)
        }
        Err(CliError::Numeric(m)) => {
            eprintln!("{}: {m}", cmd.name());
            ExitCode::from(3)
        }
    }
}
