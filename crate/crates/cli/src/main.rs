//! `layerstab` command-line front end.
//!
//! Exit codes: 0 pass, 2 audit or consistency failure, 64 configuration
//! error, 70 numerical failure.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use config::RunConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("audit failed: {0}")]
    Audit(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 64,
            CliError::Audit(_) => 2,
            CliError::Numeric(_) => 70,
        }
    }
}

pub enum Outcome {
    Pass,
    AuditFailed(String),
}

#[derive(Debug, Parser)]
#[command(name = "layerstab", version, about = "Stability checks for viscous boundary layers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Exit with status 2 when an audit fails.
    #[arg(long, global = true)]
    strict: bool,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Audit the structural hypotheses of the model.
    Check,
    /// Compute the layer profile (CSV plus JSON sidecar).
    Profile,
    /// Sample |D| along a vertical line and count windings per frequency.
    EvansMap,
    /// Strong spectral stability over the frequency grid.
    ConditionD,
    /// Linearized mode trajectories and the optional nonlinear run.
    Simulate,
    /// Energy-inequality fits along linearized trajectories.
    EnergyAudit,
    /// Stability map over a parameter grid.
    Sweep,
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let config = RunConfig::load(path)?;
    if let Some(threads) = cli.threads.or(config.threads) {
        if threads == 0 {
            return Err(CliError::Config("threads: must be at least 1".into()));
        }
        // fails only if a global pool exists already, which keeps the old width
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let out = cli.out.clone().or_else(|| config.out.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out).map_err(|e| CliError::Config(format!("out: cannot create {}: {e}", out.display())))?;
    let ctx = commands::Context { config: &config, out: &out, seed: cli.seed.or(config.seed).unwrap_or(0) };
    match cli.command {
        Command::Check => commands::check(&ctx),
        Command::Profile => commands::profile(&ctx),
        Command::EvansMap => commands::evans_map(&ctx),
        Command::ConditionD => commands::condition_d(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::EnergyAudit => commands::energy_audit(&ctx),
        Command::Sweep => commands::sweep(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Pass) => {
            println!("pass");
            ExitCode::SUCCESS
        }
        Ok(Outcome::AuditFailed(msg)) => {
            println!("fail: {msg}");
            if cli.strict {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
