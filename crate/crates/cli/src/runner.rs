//! Executes the runs of an experiment, one per seed.

use std::time::Instant;

use aes_core::evaluation::CurvePoint;
use aes_core::{
    f1_curve, run, straddle_run, AcquisitionParams, AesConfig, BernoulliNoise, GaussianNoise, GpcFit, KernelConfig,
    Oracle, QueryRecord, RunLog, TestSet, TestSetSpec,
};
use log::{info, warn};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, NoiseSpec, Strategy};
use crate::CliError;

/// Everything one seed produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub seed: u64,
    pub records: Vec<QueryRecord>,
    pub curve: Vec<CurvePoint>,
    /// Sampling time, evaluation excluded.
    pub wall_time: f64,
    /// Set when the run stalled or failed.
    pub error: Option<String>,
    /// `(x0, x1, mean, variance)` rows of the optional prediction grid.
    pub grid: Vec<[f64; 4]>,
}

impl RunOutcome {
    pub fn final_f1(&self) -> Option<f64> {
        self.curve.last().map(|p| p.global)
    }

    pub fn final_explored_f1(&self) -> Option<f64> {
        self.curve.last().and_then(|p| p.explored)
    }

    /// True when the run completed its whole budget.
    pub fn completed(&self) -> bool {
        self.error.is_none()
    }
}

pub fn build_test_set(config: &ExperimentConfig) -> Result<TestSet, CliError> {
    let problem = config.problem;
    Ok(TestSet::from_spec(&config.test_set, |x| problem.truth(x), config.test_seed)?)
}

/// The labeling oracle of run `seed`, with noise if configured.
pub fn make_oracle(config: &ExperimentConfig, seed: u64) -> Result<Box<dyn Oracle + Send>, CliError> {
    let noise_seed = config.noise_seed.wrapping_add(seed);
    let problem = config.problem;
    Ok(match config.noise {
        None => Box::new(problem),
        Some(NoiseSpec::Bernoulli(p)) => Box::new(BernoulliNoise::new(problem, p, noise_seed)?),
        Some(NoiseSpec::Gaussian(s)) => {
            let level_set = problem
                .level_set()
                .ok_or_else(|| aes_core::Error::InvalidArgument("no level set for gaussian noise".into()))?;
            Box::new(GaussianNoise::new(level_set, s, noise_seed)?)
        }
    })
}

pub fn aes_config(config: &ExperimentConfig, seed: u64) -> Result<AesConfig, CliError> {
    let mut c = AesConfig::new(config.initial_point.clone(), KernelConfig::new(config.length_scale)?);
    c.epsilon = config.epsilon;
    c.eta = config.eta;
    c.pool_size = config.pool_size;
    c.budget = config.budget;
    c.seed = seed;
    c.fallback_resample_cap = config.fallback_resample_cap;
    Ok(c)
}

fn sample(config: &ExperimentConfig, seed: u64) -> Result<RunLog, CliError> {
    let mut oracle = make_oracle(config, seed)?;
    match config.strategy {
        Strategy::Aes => Ok(run(&aes_config(config, seed)?, oracle)?),
        Strategy::Straddle => {
            let preset = config.bounds.expect("validated: straddle has bounds");
            let bounds = config.problem.bounds(preset).expect("validated: preset exists");
            let kernel = KernelConfig::new(config.length_scale)?;
            Ok(straddle_run(&bounds, &mut *oracle, kernel, config.pool_size, config.budget, seed)?)
        }
    }
}

fn prediction_grid(fit: &GpcFit, spec: &TestSetSpec, resolution: usize) -> Result<Vec<[f64; 4]>, CliError> {
    let (lower, upper) = match spec {
        TestSetSpec::Grid { lower, upper, .. } | TestSetSpec::Random { lower, upper, .. } => (lower, upper),
    };
    let coord = |k: usize, i: usize| lower[k] + (upper[k] - lower[k]) * i as f64 / (resolution - 1) as f64;
    let points: Vec<[f64; 2]> = (0..resolution)
        .flat_map(|j| (0..resolution).map(move |i| [coord(0, i), coord(1, j)]))
        .collect();
    let preds = fit.predict_many(&points)?;
    Ok(points
        .iter()
        .zip(preds)
        .map(|(p, q)| [p[0], p[1], q.mean, q.variance])
        .collect())
}

/// Runs one seed to completion; sampling failures are reported in the
/// outcome rather than returned.
pub fn execute_run(config: &ExperimentConfig, seed: u64, test: &TestSet) -> Result<RunOutcome, CliError> {
    let start = Instant::now();
    let (records, error) = match sample(config, seed) {
        Ok(log) => (log.records, log.stall.map(|e| e.to_string())),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    let wall_time = start.elapsed().as_secs_f64();
    if let Some(e) = &error {
        warn!("seed {seed}: {e}");
    }
    let mut outcome = RunOutcome {
        seed,
        records,
        curve: Vec::new(),
        wall_time,
        error,
        grid: Vec::new(),
    };
    if outcome.records.is_empty() {
        return Ok(outcome);
    }
    let kernel = KernelConfig::new(config.length_scale)?;
    let params = AcquisitionParams::new(config.epsilon, config.eta)?;
    outcome.curve = f1_curve(&outcome.records, test, kernel, &params, config.f1_stride)?;
    if let Some(resolution) = config.prediction_grid {
        let last = outcome.records.last().map_or(0, |r| r.iteration);
        let fit = aes_core::evaluation::refit_prefix(&outcome.records, last, kernel)?;
        outcome.grid = prediction_grid(&fit, &config.test_set, resolution)?;
    }
    info!(
        "seed {seed}: {} queries, final F1 {:.4}, {:.1}s",
        outcome.records.len(),
        outcome.final_f1().unwrap_or(f64::NAN),
        wall_time
    );
    Ok(outcome)
}

/// Runs every seed on a worker pool; outcomes come back in seed order.
pub fn execute_all(config: &ExperimentConfig) -> Result<Vec<RunOutcome>, CliError> {
    let test = build_test_set(config)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;
    pool.install(|| {
        config
            .seeds
            .par_iter()
            .map(|&seed| execute_run(config, seed, &test))
            .collect()
    })
}
