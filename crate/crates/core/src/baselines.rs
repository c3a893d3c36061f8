//! Bounded adaptive samplers used as baselines.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::acquisition::straddle_score;
use crate::engine::{QueryRecord, RunLog, Stage};
use crate::error::{invalid, Result};
use crate::gpc::{fit, KernelConfig, LabeledSet};
use crate::problems::Oracle;
use crate::sampling::sample_box;

/// Axis-aligned box with `lower[i] < upper[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoundedBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(invalid(format!(
                "box bounds must be non-empty and of equal length ({} vs {})",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(invalid(format!("box axis {i} has lower {lo} and upper {hi}")));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (lo, hi))| lo <= v && v <= hi)
    }
}

/// A sampler restricted to a fixed box. New bounded baselines plug in here.
pub trait BoundedSampler {
    fn name(&self) -> &'static str;

    fn run(
        &self,
        bounds: &BoundedBox,
        oracle: &mut dyn Oracle,
        kernel: KernelConfig,
        pool_size: usize,
        budget: usize,
        seed: u64,
    ) -> Result<RunLog>;
}

/// The straddle heuristic: query the pool maximizer of `1.96 sqrt(V) - |mean|`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Straddle;

impl BoundedSampler for Straddle {
    fn name(&self) -> &'static str {
        "straddle"
    }

    fn run(
        &self,
        bounds: &BoundedBox,
        oracle: &mut dyn Oracle,
        kernel: KernelConfig,
        pool_size: usize,
        budget: usize,
        seed: u64,
    ) -> Result<RunLog> {
        straddle_run(bounds, oracle, kernel, pool_size, budget, seed)
    }
}

/// Starts at the box center, then for each of `budget` iterations draws a
/// fresh uniform pool in the box and queries its straddle maximizer (lowest
/// index on ties).
pub fn straddle_run<O: Oracle + ?Sized>(
    bounds: &BoundedBox,
    oracle: &mut O,
    kernel: KernelConfig,
    pool_size: usize,
    budget: usize,
    seed: u64,
) -> Result<RunLog> {
    if budget == 0 || pool_size == 0 {
        return Err(invalid("budget and pool size must be at least 1"));
    }
    if oracle.dim() != bounds.dim() {
        return Err(invalid(format!(
            "box has {} axes but the oracle expects {}",
            bounds.dim(),
            oracle.dim()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(budget + 1);

    let start = Instant::now();
    let x0 = bounds.center();
    let y0 = oracle.label(&x0);
    let mut labeled = LabeledSet::new(bounds.dim())?;
    labeled.push(&x0, y0)?;
    let mut current = fit(&labeled, kernel)?;
    records.push(QueryRecord {
        iteration: 0,
        point: x0,
        label: y0,
        stage: Stage::Init,
        beta: None,
        gamma: None,
        prediction: None,
        wall_time: start.elapsed().as_secs_f64(),
    });

    for iteration in 1..=budget {
        let start = Instant::now();
        let mut pool = sample_box(bounds.lower(), bounds.upper(), pool_size, &mut rng);
        let predictions = current.predict_many(&pool)?;
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, p) in predictions.iter().enumerate() {
            let s = straddle_score(p);
            if s > best_score {
                best = i;
                best_score = s;
            }
        }
        let point = pool.swap_remove(best);
        let label = oracle.label(&point);
        labeled.push(&point, label)?;
        current = fit(&labeled, kernel)?;
        records.push(QueryRecord {
            iteration,
            point,
            label,
            stage: Stage::Bounded,
            beta: None,
            gamma: None,
            prediction: Some(predictions[best]),
            wall_time: start.elapsed().as_secs_f64(),
        });
    }
    Ok(RunLog {
        records,
        fit: current,
        stall: None,
    })
}
