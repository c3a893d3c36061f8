//! Experiment runner for active expansion sampling and bounded baselines.
//!
//! An experiment is one strategy on one problem over a list of seeds. Each
//! seed writes `run_seed<N>.csv` with one row per query; `summary.txt`
//! collects final F1 statistics across seeds.

pub mod config;
pub mod output;
pub mod runner;

use std::path::PathBuf;

pub use config::{ConfigError, ExperimentConfig, NoiseSpec, Settings, Strategy};
pub use runner::{execute_all, execute_run, RunOutcome};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] aes_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// Result of a finished experiment.
#[derive(Debug)]
pub struct ExperimentReport {
    pub outcomes: Vec<RunOutcome>,
    pub files: Vec<PathBuf>,
}

/// Runs every seed and writes the CSV logs and summary.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, CliError> {
    config.validate()?;
    let outcomes = execute_all(config)?;
    let files = output::write_outputs(config, &outcomes)?;
    Ok(ExperimentReport { outcomes, files })
}
