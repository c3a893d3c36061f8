//! Experiment configuration: a flat `key = value` file overlaid by flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use aes_core::{BoundsPreset, NowackiBeamParams, Problem, TestSetSpec};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "AES_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "aes-output";

/// Keys accepted in config files, identical to the long flag names.
pub const KNOWN_KEYS: &[&str] = &[
    "strategy",
    "problem",
    "dim",
    "epsilon",
    "eta",
    "length-scale",
    "budget",
    "pool-size",
    "seeds",
    "bounds",
    "noise",
    "noise-seed",
    "initial-point",
    "fallback-cap",
    "test-seed",
    "f1-stride",
    "prediction-grid",
    "threads",
    "output",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Aes,
    Straddle,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Aes => "aes",
            Strategy::Straddle => "straddle",
        }
    }
}

impl FromStr for Strategy {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "aes" => Ok(Strategy::Aes),
            "straddle" => Ok(Strategy::Straddle),
            _ => err(format!("unknown strategy {s:?} (expected aes or straddle)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    /// Label flips with probability `p`.
    Bernoulli(f64),
    /// Gaussian perturbation of the level-set value with scale `s`.
    Gaussian(f64),
}

impl FromStr for NoiseSpec {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        let Some((kind, value)) = s.split_once(':') else {
            return err(format!("noise must look like bernoulli:P or gaussian:S, got {s:?}"));
        };
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| ConfigError(format!("bad noise level {value:?}")))?;
        match kind.trim() {
            "bernoulli" if (0.0..=1.0).contains(&v) => Ok(NoiseSpec::Bernoulli(v)),
            "bernoulli" => err(format!("bernoulli flip probability must be in [0, 1], got {v}")),
            "gaussian" if v >= 0.0 && v.is_finite() => Ok(NoiseSpec::Gaussian(v)),
            "gaussian" => err(format!("gaussian noise scale must be non-negative, got {v}")),
            other => err(format!("unknown noise model {other:?}")),
        }
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseSpec::Bernoulli(p) => write!(f, "bernoulli:{p}"),
            NoiseSpec::Gaussian(s) => write!(f, "gaussian:{s}"),
        }
    }
}

fn parse_bounds(s: &str) -> Result<BoundsPreset, ConfigError> {
    match s {
        "tight" => Ok(BoundsPreset::Tight),
        "loose" => Ok(BoundsPreset::Loose),
        "insufficient" => Ok(BoundsPreset::Insufficient),
        _ => err(format!("unknown bounds preset {s:?} (expected tight, loose or insufficient)")),
    }
}

pub fn bounds_name(b: BoundsPreset) -> &'static str {
    match b {
        BoundsPreset::Tight => "tight",
        BoundsPreset::Loose => "loose",
        BoundsPreset::Insufficient => "insufficient",
    }
}

/// `"3"`, `"0..9"` (inclusive) or `"1,4,7"`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, ConfigError> {
    let bad = || ConfigError(format!("bad seed list {s:?}"));
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    let seeds: Vec<u64> = s
        .split(',')
        .map(|t| t.trim().parse().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != seeds.len() {
        return err(format!("duplicate seeds in {s:?}"));
    }
    Ok(seeds)
}

fn parse_vector(s: &str) -> Result<Vec<f64>, ConfigError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| ConfigError(format!("bad coordinate {t:?} in {s:?}")))
        })
        .collect()
}

fn parse_problem(name: &str, dim: Option<usize>) -> Result<Problem, ConfigError> {
    let problem = match name {
        "branin" => Problem::Branin,
        "hosaki" => Problem::Hosaki,
        "nowacki" => Problem::Nowacki(NowackiBeamParams::default()),
        "double_sphere" | "double-sphere" => {
            let d = dim.ok_or_else(|| ConfigError("double_sphere needs --dim".into()))?;
            Problem::double_sphere(d).map_err(|e| ConfigError(e.to_string()))?
        }
        _ => return err(format!("unknown problem {name:?}")),
    };
    if let Some(d) = dim {
        if d != problem.dim() {
            return err(format!("{name} is {}-dimensional, got --dim {d}", problem.dim()));
        }
    }
    Ok(problem)
}

/// Raw key/value settings before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings(BTreeMap<String, String>);

impl Settings {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut out = Settings::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return err(format!("line {}: expected key = value", n + 1));
            };
            out.set(k.trim(), v.trim())
                .map_err(|e| ConfigError(format!("line {}: {e}", n + 1)))?;
        }
        Ok(out)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), ConfigError> {
        let key = key.replace('_', "-");
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return err(format!("unknown setting {key:?}"));
        }
        self.0.insert(key, value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    /// Values in `other` win.
    pub fn overlay(&mut self, other: &Settings) {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), v.clone());
        }
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| ConfigError(format!("bad value {v:?} for {key}"))),
        }
    }

    fn required(&self, key: &str) -> Result<&str, ConfigError> {
        self.get(key).ok_or_else(|| ConfigError(format!("missing required setting --{key}")))
    }
}

/// A fully validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub strategy: Strategy,
    pub problem: Problem,
    pub noise: Option<NoiseSpec>,
    pub noise_seed: u64,
    pub epsilon: f64,
    pub eta: f64,
    pub length_scale: f64,
    pub pool_size: usize,
    pub budget: usize,
    pub initial_point: Vec<f64>,
    pub fallback_resample_cap: usize,
    pub bounds: Option<BoundsPreset>,
    pub seeds: Vec<u64>,
    pub test_set: TestSetSpec,
    pub test_seed: u64,
    pub f1_stride: usize,
    /// Resolution of the optional per-run prediction grid (2-d problems only).
    pub prediction_grid: Option<usize>,
    /// Worker threads; `None` uses every hardware thread.
    pub threads: Option<usize>,
    pub output: PathBuf,
}

impl ExperimentConfig {
    /// Defaults for everything except strategy, problem and budget.
    pub fn new(strategy: Strategy, problem: Problem, budget: usize) -> Self {
        Self {
            strategy,
            problem,
            noise: None,
            noise_seed: 0,
            epsilon: 0.3,
            eta: 1.3,
            length_scale: problem.default_length_scale(),
            pool_size: 500,
            budget,
            initial_point: problem.default_initial_point(),
            fallback_resample_cap: 5,
            bounds: None,
            seeds: vec![0],
            test_set: problem.default_test_set(),
            test_seed: 0,
            f1_stride: 10,
            prediction_grid: None,
            threads: None,
            output: default_output_dir(),
        }
    }

    pub fn from_settings(s: &Settings) -> Result<Self, ConfigError> {
        let strategy: Strategy = s.required("strategy")?.parse()?;
        let dim = s.parsed::<usize>("dim")?;
        let problem = parse_problem(s.required("problem")?, dim)?;
        let budget = s
            .required("budget")?
            .parse()
            .map_err(|_| ConfigError("budget must be a positive integer".into()))?;
        let mut c = Self::new(strategy, problem, budget);
        if let Some(v) = s.get("noise") {
            c.noise = if v == "none" { None } else { Some(v.parse()?) };
        }
        c.noise_seed = s.parsed("noise-seed")?.unwrap_or(c.noise_seed);
        c.epsilon = s.parsed("epsilon")?.unwrap_or(c.epsilon);
        c.eta = s.parsed("eta")?.unwrap_or(c.eta);
        c.length_scale = s.parsed("length-scale")?.unwrap_or(c.length_scale);
        c.pool_size = s.parsed("pool-size")?.unwrap_or(c.pool_size);
        c.fallback_resample_cap = s.parsed("fallback-cap")?.unwrap_or(c.fallback_resample_cap);
        if let Some(v) = s.get("initial-point") {
            c.initial_point = parse_vector(v)?;
        }
        if let Some(v) = s.get("bounds") {
            c.bounds = Some(parse_bounds(v)?);
        }
        if let Some(v) = s.get("seeds") {
            c.seeds = parse_seeds(v)?;
        }
        c.test_seed = s.parsed("test-seed")?.unwrap_or(c.test_seed);
        c.f1_stride = s.parsed("f1-stride")?.unwrap_or(c.f1_stride);
        c.prediction_grid = s.parsed("prediction-grid")?;
        c.threads = s.parsed("threads")?;
        if let Some(v) = s.get("output") {
            c.output = PathBuf::from(v);
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return err(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.eta.is_finite() && self.eta >= 1.0) {
            return err(format!("eta must be at least 1, got {}", self.eta));
        }
        if !(self.length_scale.is_finite() && self.length_scale > 0.0) {
            return err(format!("length scale must be positive, got {}", self.length_scale));
        }
        if self.budget == 0 || self.pool_size == 0 || self.fallback_resample_cap == 0 {
            return err("budget, pool size and fallback cap must be at least 1");
        }
        if self.f1_stride == 0 {
            return err("f1 stride must be at least 1");
        }
        if self.threads == Some(0) {
            return err("threads must be at least 1");
        }
        if self.seeds.is_empty() {
            return err("no seeds given");
        }
        if self.initial_point.len() != self.problem.dim() {
            return err(format!(
                "initial point has {} coordinates, {} expects {}",
                self.initial_point.len(),
                self.problem.name(),
                self.problem.dim()
            ));
        }
        match (self.strategy, self.bounds) {
            (Strategy::Straddle, None) => return err("straddle needs --bounds"),
            (Strategy::Aes, Some(_)) => return err("aes does not take --bounds"),
            (Strategy::Straddle, Some(b)) if self.problem.bounds(b).is_none() => {
                return err(format!("{} has no {} bounds", self.problem.name(), bounds_name(b)));
            }
            _ => {}
        }
        if let Some(NoiseSpec::Gaussian(_)) = self.noise {
            if self.problem.level_set().is_none() {
                return err(format!("gaussian noise is not defined for {}", self.problem.name()));
            }
        }
        if let Some(r) = self.prediction_grid {
            if self.problem.dim() != 2 || r < 2 {
                return err("prediction grids need a 2-d problem and resolution of at least 2");
            }
        }
        Ok(())
    }
}

pub fn default_output_dir() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}
