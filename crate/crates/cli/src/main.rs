//! `kfp`: simulate, sweep and verify the Hermite hierarchy solver.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 failed verification, 1 I/O error.

mod commands;
mod config;
mod output;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Context;
use crate::config::RunConfig;
use crate::output::SnapshotFormat;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("verification failed: {0}")]
    Verify(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Verify(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "kfp", version, about = "Hermite moment hierarchy solver for the kinetic Fokker-Planck equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "kfp-out")]
    out: PathBuf,

    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed for randomized checks; overrides the config value.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Coefficient snapshot format.
    #[arg(long, global = true, value_enum, default_value_t = SnapshotFormat::Csv)]
    format: SnapshotFormat,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Integrate one configuration and write the trajectory, snapshots and metadata.
    Simulate,
    /// Truncation-error study over `sweep_m.m_list` against `sweep_m.m_star`.
    #[command(name = "sweep-m")]
    SweepM,
    /// Whole-space periodization study over `sweep_r.radii`.
    #[command(name = "sweep-R", alias = "sweep-r")]
    SweepR,
    /// Run the structural property battery.
    Verify,
}

fn run(cli: &Cli) -> Result<String, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.threads == Some(0) {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))?;
    let (name, f): (&'static str, fn(&RunConfig, &Context) -> Result<String, CliError>) = match cli.command {
        Command::Simulate => ("simulate", commands::simulate),
        Command::SweepM => ("sweep-m", commands::sweep_m),
        Command::SweepR => ("sweep-R", commands::sweep_r),
        Command::Verify => ("verify", verify::verify),
    };
    let ctx = Context { out: cli.out.clone(), format: cli.format, threads: pool.current_num_threads(), command: name };
    pool.install(|| f(&cfg, &ctx))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("kfp: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
