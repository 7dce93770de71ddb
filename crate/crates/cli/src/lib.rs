//! Command-line front end: runs, sweeps, oracle checks and partition reports.
//!
//! Exit codes: 0 success, 1 a check failed, 2 usage, config or runtime error.

pub mod commands;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "feel", version, about = "Data-aware scheduling simulator for federated edge learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write rounds.csv, summary.json and the resolved config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides `sim.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run seeds `seed .. seed + runs` and write per-run and mean curves.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        runs: u64,
        /// Worker threads; all cores when omitted.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        jobs: Option<u64>,
        /// Base seed; overrides `sim.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare DAS with exhaustive enumeration on a JSON instance (at most 12 devices).
    Oracle {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Print the per-device data partition a config produces.
    Partition {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV instead of an aligned table.
        #[arg(long)]
        csv: bool,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] feel_core::Error),
    #[error("all {0} runs failed")]
    AllRunsFailed(usize),
    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Self::Io { path: path.to_path_buf(), message: e.to_string() }
    }

    pub fn csv(path: &Path, e: csv::Error) -> Self {
        Self::io(path, e)
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::CheckFailed(_) => 1,
            _ => 2,
        }
    }
}

/// Dispatches a parsed command line, writing reports to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn std::io::Write) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out, seed } => commands::cmd_run(&config, &out, seed, stdout),
        Command::Sweep { config, out, runs, jobs, seed } => {
            commands::cmd_sweep(&config, runs as usize, &out, jobs.map(|j| j as usize), seed, stdout)
        }
        Command::Oracle { instance } => commands::cmd_oracle(&instance, stdout),
        Command::Partition { config, seed, csv } => commands::cmd_partition(&config, seed, csv, stdout),
    }
}
