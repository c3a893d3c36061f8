//! The active expansion sampling loop.
//!
//! Each iteration refits nothing by itself: the state always carries the fit
//! for the current labeled set. A step
//!
//! 1. fixes the center `c` (the initial point until both classes have been
//!    seen, then the centroid of the feasible samples at that moment, frozen),
//! 2. draws a pool in the ball of radius `γ l` around the previous query and
//!    calls the stage *exploit* iff the pool points satisfying the margin
//!    constraint contain both predicted classes,
//! 3. on exploit, picks the constrained minimizer of the predictive variance
//!    from that same pool; on explore, draws a fresh pool of radius `β l`
//!    (around the labeled sample farthest from `c` right after an exploit
//!    stage, around the previous query otherwise) and picks the constrained
//!    point closest to `c`,
//! 4. labels the query and refits.

use std::time::Instant;

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::acquisition::{aes_constraint_satisfied, AcquisitionParams};
use crate::error::{invalid, Error, Result};
use crate::gpc::{fit, GpcFit, KernelConfig, Label, LabeledSet, Prediction};
use crate::problems::Oracle;
use crate::sampling::{distance, sample_ball};

/// Pool radius, in length scales, used when `β` or `γ` is undefined.
pub const DEGENERATE_RADIUS_FACTOR: f64 = 3.0;

/// Radius multiplier applied per extra attempt once the recentered pool is
/// also empty. With a single labeled sample the constrained region starts
/// exactly on the sphere of radius `β l`, so an unenlarged ball never holds a
/// candidate.
pub const FALLBACK_RADIUS_GROWTH: f64 = 1.5;

/// Enlarged attempts before the engine gives up.
pub const FALLBACK_GROWTH_STEPS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct AesConfig {
    pub epsilon: f64,
    pub eta: f64,
    pub kernel: KernelConfig,
    pub pool_size: usize,
    /// Number of queries after the initial point.
    pub budget: usize,
    pub initial_point: Vec<f64>,
    pub seed: u64,
    /// Fresh pools drawn when no candidate satisfies the constraint, before
    /// recentering at the periphery.
    pub fallback_resample_cap: usize,
}

impl AesConfig {
    pub fn new(initial_point: Vec<f64>, kernel: KernelConfig) -> Self {
        Self {
            epsilon: 0.3,
            eta: 1.3,
            kernel,
            pool_size: 500,
            budget: 100,
            initial_point,
            seed: 0,
            fallback_resample_cap: 5,
        }
    }

    pub fn params(&self) -> Result<AcquisitionParams> {
        AcquisitionParams::new(self.epsilon, self.eta)
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        if self.pool_size == 0 {
            return Err(invalid("pool size must be at least 1"));
        }
        if self.budget == 0 {
            return Err(invalid("budget must be at least 1"));
        }
        if self.initial_point.is_empty() || self.initial_point.iter().any(|v| !v.is_finite()) {
            return Err(invalid("initial point must be a finite, non-empty vector"));
        }
        if self.fallback_resample_cap == 0 {
            return Err(invalid("fallback resample cap must be at least 1"));
        }
        Ok(())
    }
}

/// Which rule produced a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    /// The initial point (or a bounded baseline's first query).
    Init,
    Exploit,
    Explore,
    /// Queries of a bounded baseline.
    Bounded,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Init => "init",
            Stage::Exploit => "exploit",
            Stage::Explore => "explore",
            Stage::Bounded => "bounded",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "init" => Ok(Stage::Init),
            "exploit" => Ok(Stage::Exploit),
            "explore" => Ok(Stage::Explore),
            "bounded" => Ok(Stage::Bounded),
            other => Err(invalid(format!("unknown stage {other:?}"))),
        }
    }
}

/// One labeled query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryRecord {
    pub iteration: usize,
    pub point: Vec<f64>,
    pub label: Label,
    pub stage: Stage,
    /// `β` of the fit the query was selected under; `None` when undefined.
    pub beta: Option<f64>,
    /// `γ` of the fit the query was selected under; `None` when undefined.
    pub gamma: Option<f64>,
    /// Prediction at the query under the fit it was selected with.
    pub prediction: Option<Prediction>,
    /// Seconds spent on this iteration, refit included.
    pub wall_time: f64,
}

/// Radius coefficient bounding the distance from any optimal query to its
/// nearest labeled sample.
pub fn beta_coefficient(mu: f64, nu: f64, params: &AcquisitionParams) -> Result<f64> {
    let (eps, eta) = (params.epsilon(), params.eta());
    let num = mu * mu + eta * eta * eps * eps * nu;
    let den = eta * eps * (mu * mu + (eta * eta - 1.0) * eps * eps * nu).sqrt() - eps * mu;
    if !(den > 0.0) {
        return Err(Error::DegenerateGeometry(format!(
            "beta denominator is {den:.3e} (mu {mu:.4}, nu {nu:.4})"
        )));
    }
    let arg = num / den;
    if !(arg > 1.0) || !arg.is_finite() {
        return Err(Error::DegenerateGeometry(format!("beta log argument is {arg:.6}")));
    }
    Ok((2.0 * arg.ln()).sqrt())
}

/// Radius coefficient for optimal queries in the exploitation stage.
pub fn gamma_coefficient(nu: f64, params: &AcquisitionParams) -> Result<f64> {
    let eta2 = params.eta() * params.eta();
    if !(eta2 > 1.0) {
        return Err(Error::DegenerateGeometry("gamma requires eta > 1".into()));
    }
    let arg = eta2 * nu / (eta2 - 1.0);
    if !(arg > 1.0) || !arg.is_finite() {
        return Err(Error::DegenerateGeometry(format!("gamma log argument is {arg:.6}")));
    }
    Ok(arg.ln().sqrt())
}

pub fn compute_beta(fit: &GpcFit, params: &AcquisitionParams) -> Result<f64> {
    beta_coefficient(fit.mu(), fit.nu(), params)
}

pub fn compute_gamma(fit: &GpcFit, params: &AcquisitionParams) -> Result<f64> {
    gamma_coefficient(fit.nu(), params)
}

/// Candidate points together with their predictions under one fit.
#[derive(Debug, Clone)]
pub struct Pool {
    pub points: Vec<Vec<f64>>,
    pub predictions: Vec<Prediction>,
}

impl Pool {
    pub fn evaluate(fit: &GpcFit, points: Vec<Vec<f64>>) -> Result<Self> {
        let predictions = fit.predict_many(&points)?;
        Ok(Self { points, predictions })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Exploit iff the constrained candidates contain both `mean < 0` and
/// `mean > 0`; explore otherwise (including when none satisfy the constraint).
pub fn classify_pool(predictions: &[Prediction], params: &AcquisitionParams) -> Stage {
    let (mut neg, mut pos) = (false, false);
    for p in predictions.iter().filter(|p| aes_constraint_satisfied(p, params)) {
        neg |= p.mean < 0.0;
        pos |= p.mean > 0.0;
        if neg && pos {
            return Stage::Exploit;
        }
    }
    Stage::Explore
}

/// Outcome of stage detection; the pool is reused as the exploit candidates.
#[derive(Debug, Clone)]
pub struct StageDetection {
    pub stage: Stage,
    pub pool: Pool,
    pub gamma: Option<f64>,
    pub radius: f64,
}

fn radius_or_fallback(coefficient: &Result<f64>, kernel: &KernelConfig, what: &str) -> f64 {
    match coefficient {
        Ok(c) => c * kernel.length_scale(),
        Err(e) => {
            warn!("{what} undefined ({e}); using {DEGENERATE_RADIUS_FACTOR} length scales");
            DEGENERATE_RADIUS_FACTOR * kernel.length_scale()
        }
    }
}

pub fn detect_stage<R: Rng + ?Sized>(
    fit: &GpcFit,
    previous_query: &[f64],
    config: &AesConfig,
    rng: &mut R,
) -> Result<StageDetection> {
    let params = config.params()?;
    let gamma = compute_gamma(fit, &params);
    let radius = radius_or_fallback(&gamma, &config.kernel, "gamma");
    let pool = Pool::evaluate(fit, sample_ball(previous_query, radius, config.pool_size, rng))?;
    Ok(StageDetection {
        stage: classify_pool(&pool.predictions, &params),
        pool,
        gamma: gamma.ok(),
        radius,
    })
}

/// Index of the constrained minimizer of `V` (exploit) or of `|x - c|`
/// (explore); lowest index wins ties. `None` when no candidate satisfies the
/// constraint.
pub fn select_query(pool: &Pool, stage: Stage, center: &[f64], params: &AcquisitionParams) -> Option<usize> {
    let objective = |i: usize| match stage {
        Stage::Exploit => pool.predictions[i].variance,
        _ => distance(&pool.points[i], center),
    };
    let mut best: Option<(usize, f64)> = None;
    for i in 0..pool.len() {
        if !aes_constraint_satisfied(&pool.predictions[i], params) {
            continue;
        }
        let v = objective(i);
        if best.map_or(true, |(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Evolving state of one run.
#[derive(Debug, Clone)]
pub struct AesState {
    labeled: LabeledSet,
    fit: GpcFit,
    initial_point: Vec<f64>,
    center: Vec<f64>,
    init_flag: bool,
    stage: Stage,
    previous_query: Vec<f64>,
    previous_stage: Stage,
    iteration: usize,
}

impl AesState {
    /// Labels the initial point and fits the classifier to it.
    pub fn initialize<O: Oracle + ?Sized>(config: &AesConfig, oracle: &mut O) -> Result<(Self, QueryRecord)> {
        config.validate()?;
        if oracle.dim() != config.initial_point.len() {
            return Err(invalid(format!(
                "initial point has {} coordinates but the oracle expects {}",
                config.initial_point.len(),
                oracle.dim()
            )));
        }
        let start = Instant::now();
        let x0 = config.initial_point.clone();
        let y0 = oracle.label(&x0);
        let mut labeled = LabeledSet::new(x0.len())?;
        labeled.push(&x0, y0)?;
        let fit = fit(&labeled, config.kernel)?;
        let state = Self {
            labeled,
            fit,
            initial_point: x0.clone(),
            center: x0.clone(),
            init_flag: true,
            stage: Stage::Init,
            previous_query: x0.clone(),
            previous_stage: Stage::Init,
            iteration: 0,
        };
        let record = QueryRecord {
            iteration: 0,
            point: x0,
            label: y0,
            stage: Stage::Init,
            beta: None,
            gamma: None,
            prediction: None,
            wall_time: start.elapsed().as_secs_f64(),
        };
        Ok((state, record))
    }

    pub fn labeled(&self) -> &LabeledSet {
        &self.labeled
    }

    pub fn fit(&self) -> &GpcFit {
        &self.fit
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// True until both classes have been observed.
    pub fn init_flag(&self) -> bool {
        self.init_flag
    }

    /// Stage of the most recent query.
    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn previous_query(&self) -> &[f64] {
        &self.previous_query
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    fn farthest_from_center(&self) -> Vec<f64> {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, p) in self.labeled.points().enumerate() {
            let d = distance(p, &self.center);
            if d > best.1 {
                best = (i, d);
            }
        }
        self.labeled.point(best.0).to_vec()
    }

    fn update_center(&mut self) {
        if !self.init_flag {
            return;
        }
        if self.labeled.has_both_classes() {
            self.init_flag = false;
            self.center = self
                .labeled
                .feasible_centroid()
                .expect("both classes present implies a feasible sample");
            debug!("both classes observed at iteration {}; center fixed at {:?}", self.iteration, self.center);
        } else {
            self.center = self.initial_point.clone();
        }
    }

    /// Runs one iteration: selects a query, labels it and refits.
    pub fn step<O: Oracle + ?Sized, R: Rng + ?Sized>(
        &mut self,
        config: &AesConfig,
        oracle: &mut O,
        rng: &mut R,
    ) -> Result<QueryRecord> {
        let start = Instant::now();
        let params = config.params()?;
        let iteration = self.iteration + 1;
        self.update_center();

        let detection = detect_stage(&self.fit, &self.previous_query, config, rng)?;
        let beta = compute_beta(&self.fit, &params);
        let stage = detection.stage;

        let (mut pool, mut pool_center, radius) = match stage {
            Stage::Exploit => (detection.pool, self.previous_query.clone(), detection.radius),
            _ => {
                let radius = radius_or_fallback(&beta, &config.kernel, "beta");
                let pool_center = if self.previous_stage == Stage::Exploit {
                    self.farthest_from_center()
                } else {
                    self.previous_query.clone()
                };
                let points = sample_ball(&pool_center, radius, config.pool_size, rng);
                (Pool::evaluate(&self.fit, points)?, pool_center, radius)
            }
        };

        let mut chosen = select_query(&pool, stage, &self.center, &params);
        let mut attempts = 0;
        while chosen.is_none() && attempts < config.fallback_resample_cap {
            attempts += 1;
            pool = Pool::evaluate(&self.fit, sample_ball(&pool_center, radius, config.pool_size, rng))?;
            chosen = select_query(&pool, stage, &self.center, &params);
        }
        if chosen.is_none() {
            pool_center = self.farthest_from_center();
            debug!("iteration {iteration}: no feasible candidate, recentering at {pool_center:?}");
            let mut r = radius;
            for _ in 0..=FALLBACK_GROWTH_STEPS {
                pool = Pool::evaluate(&self.fit, sample_ball(&pool_center, r, config.pool_size, rng))?;
                chosen = select_query(&pool, stage, &self.center, &params);
                if chosen.is_some() {
                    break;
                }
                r *= FALLBACK_RADIUS_GROWTH;
            }
        }
        let index = chosen.ok_or_else(|| Error::EngineStall {
            iteration,
            center: pool_center.clone(),
            radius,
            labeled: self.labeled.len(),
        })?;

        let point = pool.points.swap_remove(index);
        let prediction = pool.predictions[index];
        let label = oracle.label(&point);
        self.labeled.push(&point, label)?;
        self.fit = fit(&self.labeled, config.kernel)?;

        self.iteration = iteration;
        self.previous_query = point.clone();
        self.previous_stage = stage;
        self.stage = stage;

        Ok(QueryRecord {
            iteration,
            point,
            label,
            stage,
            beta: beta.ok(),
            gamma: detection.gamma,
            prediction: Some(prediction),
            wall_time: start.elapsed().as_secs_f64(),
        })
    }
}

/// Records of a finished (or stalled) run and the fit to all its labels.
#[derive(Debug, Clone)]
pub struct RunLog {
    pub records: Vec<QueryRecord>,
    pub fit: GpcFit,
    /// Set when the run stopped early on an engine stall.
    pub stall: Option<Error>,
}

impl RunLog {
    pub fn labeled_set(&self) -> &LabeledSet {
        self.fit.training()
    }
}

/// Labels the initial point, then performs `config.budget` steps.
/// Deterministic given `config.seed` and a deterministic oracle.
pub fn run<O: Oracle>(config: &AesConfig, mut oracle: O) -> Result<RunLog> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (mut state, first) = AesState::initialize(config, &mut oracle)?;
    let mut records = Vec::with_capacity(config.budget + 1);
    records.push(first);
    let mut stall = None;
    for _ in 0..config.budget {
        match state.step(config, &mut oracle, &mut rng) {
            Ok(record) => records.push(record),
            Err(e @ Error::EngineStall { .. }) => {
                warn!("{e}");
                stall = Some(e);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(RunLog {
        records,
        fit: state.fit,
        stall,
    })
}
