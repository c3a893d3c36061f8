//! F1 accuracy over fixed test sets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::acquisition::{epsilon_margin_probability, AcquisitionParams};
use crate::engine::QueryRecord;
use crate::error::{invalid, Result};
use crate::gpc::{fit, GpcFit, KernelConfig, Label, LabeledSet};
use crate::problems::TestSetSpec;
use crate::sampling::sample_box;

/// Points with their noiseless labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    pub points: Vec<Vec<f64>>,
    pub truth: Vec<Label>,
}

impl TestSet {
    pub fn new(points: Vec<Vec<f64>>, truth: Vec<Label>) -> Result<Self> {
        if points.len() != truth.len() {
            return Err(invalid(format!("{} points but {} labels", points.len(), truth.len())));
        }
        Ok(Self { points, truth })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Builds the set described by `spec`; `seed` only matters for random sets.
    pub fn from_spec(spec: &TestSetSpec, truth: impl Fn(&[f64]) -> Label, seed: u64) -> Result<Self> {
        match spec {
            TestSetSpec::Grid { lower, upper, resolution } => grid_test_set(lower, upper, *resolution, truth),
            TestSetSpec::Random { lower, upper, count } => random_test_set(lower, upper, *count, truth, seed),
        }
    }
}

fn check_region(lower: &[f64], upper: &[f64]) -> Result<()> {
    if lower.len() != upper.len() || lower.is_empty() {
        return Err(invalid("region bounds must be non-empty and of equal length"));
    }
    if lower.iter().zip(upper).any(|(lo, hi)| !(lo < hi)) {
        return Err(invalid("region lower bounds must be below upper bounds"));
    }
    Ok(())
}

/// `resolution x resolution` lattice over a 2-d region, endpoints included.
pub fn grid_test_set(
    lower: &[f64],
    upper: &[f64],
    resolution: usize,
    truth: impl Fn(&[f64]) -> Label,
) -> Result<TestSet> {
    check_region(lower, upper)?;
    if lower.len() != 2 {
        return Err(invalid(format!(
            "grid test sets are two-dimensional; use a random test set for d = {}",
            lower.len()
        )));
    }
    if resolution < 2 {
        return Err(invalid("grid resolution must be at least 2"));
    }
    let axis = |k: usize| -> Vec<f64> {
        let step = (upper[k] - lower[k]) / (resolution - 1) as f64;
        (0..resolution)
            .map(|i| if i + 1 == resolution { upper[k] } else { lower[k] + step * i as f64 })
            .collect()
    };
    let (xs, ys) = (axis(0), axis(1));
    let points: Vec<Vec<f64>> = ys.iter().flat_map(|&y| xs.iter().map(move |&x| vec![x, y])).collect();
    let truth = points.iter().map(|p| truth(p)).collect();
    Ok(TestSet { points, truth })
}

/// `count` uniform points in the region.
pub fn random_test_set(
    lower: &[f64],
    upper: &[f64],
    count: usize,
    truth: impl Fn(&[f64]) -> Label,
    seed: u64,
) -> Result<TestSet> {
    check_region(lower, upper)?;
    if count == 0 {
        return Err(invalid("random test set needs at least one point"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = sample_box(lower, upper, count, &mut rng);
    let truth = points.iter().map(|p| truth(p)).collect();
    Ok(TestSet { points, truth })
}

/// F1 with "feasible" as the positive class; 0 when there are no true positives.
pub fn f1_score(predicted: &[Label], truth: &[Label]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(invalid(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.is_empty() {
        return Err(invalid("F1 of an empty set is undefined"));
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (p, t) in predicted.iter().zip(truth) {
        match (p.is_feasible(), t.is_feasible()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return Ok(0.0);
    }
    Ok(2.0 * tp as f64 / (2 * tp + fp + fn_) as f64)
}

/// Class predictions `mean >= 0 -> feasible` over the whole test set.
pub fn predict_labels(fit: &GpcFit, test: &TestSet) -> Result<Vec<Label>> {
    Ok(fit.predict_mean_many(&test.points)?.into_iter().map(Label::from_latent).collect())
}

pub fn global_f1(fit: &GpcFit, test: &TestSet) -> Result<f64> {
    f1_score(&predict_labels(fit, test)?, &test.truth)
}

/// F1 and size of the explored region, where `p_ε < τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExploredF1 {
    /// `None` when no test point is explored.
    pub f1: Option<f64>,
    pub explored: usize,
}

pub fn explored_region_summary(fit: &GpcFit, params: &AcquisitionParams, test: &TestSet) -> Result<ExploredF1> {
    let tau = params.tau();
    let preds = fit.predict_many(&test.points)?;
    let (mut predicted, mut truth) = (Vec::new(), Vec::new());
    for (p, t) in preds.iter().zip(&test.truth) {
        if epsilon_margin_probability(p, params) < tau {
            predicted.push(Label::from_latent(p.mean));
            truth.push(*t);
        }
    }
    let explored = predicted.len();
    let f1 = if explored == 0 { None } else { Some(f1_score(&predicted, &truth)?) };
    Ok(ExploredF1 { f1, explored })
}

/// F1 restricted to test points with `p_ε < τ`; `None` when there are none.
pub fn explored_region_f1(fit: &GpcFit, params: &AcquisitionParams, test: &TestSet) -> Result<Option<f64>> {
    Ok(explored_region_summary(fit, params, test)?.f1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub iteration: usize,
    pub global: f64,
    pub explored: Option<f64>,
    pub explored_count: usize,
}

/// Iterations sampled by a curve: positive multiples of `stride`, plus the last.
pub fn curve_iterations(last: usize, stride: usize) -> Vec<usize> {
    let mut its: Vec<usize> = (1..).map(|k| k * stride).take_while(|&i| i <= last).collect();
    if its.last() != Some(&last) {
        its.push(last);
    }
    its
}

/// Fits the classifier to the labels of `records[..=iteration]`.
pub fn refit_prefix(records: &[QueryRecord], iteration: usize, kernel: KernelConfig) -> Result<GpcFit> {
    let upto = records
        .iter()
        .position(|r| r.iteration == iteration)
        .ok_or_else(|| invalid(format!("no record for iteration {iteration}")))?;
    let d = records[0].point.len();
    let mut set = LabeledSet::new(d)?;
    for r in &records[..=upto] {
        set.push(&r.point, r.label)?;
    }
    fit(&set, kernel)
}

/// Global and explored-region F1 along a run, refitting from label prefixes.
pub fn f1_curve(
    records: &[QueryRecord],
    test: &TestSet,
    kernel: KernelConfig,
    params: &AcquisitionParams,
    stride: usize,
) -> Result<Vec<CurvePoint>> {
    if stride == 0 {
        return Err(invalid("stride must be at least 1"));
    }
    let Some(last) = records.last() else {
        return Err(invalid("no records"));
    };
    curve_iterations(last.iteration, stride)
        .into_iter()
        .map(|iteration| {
            let fit = refit_prefix(records, iteration, kernel)?;
            let explored = explored_region_summary(&fit, params, test)?;
            Ok(CurvePoint {
                iteration,
                global: global_f1(&fit, test)?,
                explored: explored.f1,
                explored_count: explored.explored,
            })
        })
        .collect()
}
