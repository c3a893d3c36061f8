//! Benchmark oracles and label-noise wrappers.
//!
//! All noiseless oracles are pure functions of the input. Noise wrappers own
//! a private ChaCha stream seeded independently of the sampling engine, so a
//! given noise seed produces the same realization whatever strategy queries
//! the oracle.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::baselines::BoundedBox;
use crate::error::{invalid, Result};
use crate::gpc::Label;

/// A labeling function over `R^d`.
pub trait Oracle {
    fn dim(&self) -> usize;
    fn label(&mut self, x: &[f64]) -> Label;
}

impl<O: Oracle + ?Sized> Oracle for &mut O {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn label(&mut self, x: &[f64]) -> Label {
        (**self).label(x)
    }
}

impl<O: Oracle + ?Sized> Oracle for Box<O> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn label(&mut self, x: &[f64]) -> Label {
        (**self).label(x)
    }
}

/// Wraps a closure as an oracle.
pub struct FnOracle<F> {
    dim: usize,
    f: F,
}

impl<F: FnMut(&[f64]) -> Label> FnOracle<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: FnMut(&[f64]) -> Label> Oracle for FnOracle<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn label(&mut self, x: &[f64]) -> Label {
        (self.f)(x)
    }
}

/// A feasible set of the form `{x in domain : value(x) <= threshold}`; the
/// form Gaussian noise is injected into.
pub trait LevelSet {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn threshold(&self) -> f64;
    fn in_domain(&self, _x: &[f64]) -> bool {
        true
    }

    fn classify(&self, x: &[f64]) -> Label {
        if self.in_domain(x) && self.value(x) <= self.threshold() {
            Label::Feasible
        } else {
            Label::Infeasible
        }
    }
}

/// Branin function.
pub fn branin(x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    (x2 - b * x1 * x1 + c * x1 - 6.0).powi(2) + 10.0 * (1.0 - t) * x1.cos() + 10.0
}

/// Hosaki function.
pub fn hosaki(x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    let poly = 1.0 - 8.0 * x1 + 7.0 * x1 * x1 - 7.0 / 3.0 * x1.powi(3) + 0.25 * x1.powi(4);
    poly * x2 * x2 * (-x2).exp()
}

/// Branin feasibility: `g <= 8` inside the open box `(-9, 14) x (-7, 17)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Branin;

impl LevelSet for Branin {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, x: &[f64]) -> f64 {
        branin(x)
    }
    fn threshold(&self) -> f64 {
        8.0
    }
    fn in_domain(&self, x: &[f64]) -> bool {
        -9.0 < x[0] && x[0] < 14.0 && -7.0 < x[1] && x[1] < 17.0
    }
}

/// Hosaki feasibility: `g <= -1` inside the open box `(0, 5)^2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Hosaki;

impl LevelSet for Hosaki {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, x: &[f64]) -> f64 {
        hosaki(x)
    }
    fn threshold(&self) -> f64 {
        -1.0
    }
    fn in_domain(&self, x: &[f64]) -> bool {
        0.0 < x[0] && x[0] < 5.0 && 0.0 < x[1] && x[1] < 5.0
    }
}

/// Two unit balls centered at the origin and at `(3, 0, ..., 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DoubleSphere {
    dim: usize,
}

impl DoubleSphere {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(invalid("double-sphere problem needs at least two dimensions"));
        }
        Ok(Self { dim })
    }
}

impl LevelSet for DoubleSphere {
    fn dim(&self) -> usize {
        self.dim
    }
    /// Distance to the nearer center.
    fn value(&self, x: &[f64]) -> f64 {
        let rest: f64 = x[1..].iter().map(|v| v * v).sum();
        let da = (x[0] * x[0] + rest).sqrt();
        let db = ((x[0] - 3.0).powi(2) + rest).sqrt();
        da.min(db)
    }
    fn threshold(&self) -> f64 {
        1.0
    }
}

pub fn branin_label(x: &[f64]) -> Label {
    Branin.classify(x)
}

pub fn hosaki_label(x: &[f64]) -> Label {
    Hosaki.classify(x)
}

/// Panics if `x` has fewer than two coordinates.
pub fn double_sphere_label(x: &[f64]) -> Label {
    DoubleSphere { dim: x.len() }.classify(x)
}

pub fn nowacki_label(x: &[f64]) -> Label {
    NowackiBeamParams::default().label(x)
}

/// Constants of the cantilever beam problem, SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NowackiBeamParams {
    pub beam_length: f64,
    pub load: f64,
    pub safety_factor: f64,
    pub yield_stress: f64,
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub shear_modulus: f64,
    pub area_cap: f64,
    pub deflection_cap: f64,
    pub aspect_cap: f64,
}

impl Default for NowackiBeamParams {
    fn default() -> Self {
        Self {
            beam_length: 0.5,
            load: 5.0e3,
            safety_factor: 2.0,
            yield_stress: 240.0e6,
            youngs_modulus: 216.62e9,
            poisson_ratio: 0.27,
            shear_modulus: 86.65e9,
            area_cap: 0.0025,
            deflection_cap: 0.005,
            aspect_cap: 10.0,
        }
    }
}

/// Caps are inclusive; the relative slack absorbs round-off for designs that
/// sit exactly on a cap, e.g. `0.05 * 0.05` against `0.0025`.
const CAP_RTOL: f64 = 1e-12;

fn at_most(value: f64, cap: f64) -> bool {
    value <= cap * (1.0 + CAP_RTOL)
}

impl NowackiBeamParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.beam_length,
            self.load,
            self.safety_factor,
            self.yield_stress,
            self.youngs_modulus,
            self.poisson_ratio,
            self.shear_modulus,
            self.area_cap,
            self.deflection_cap,
            self.aspect_cap,
        ];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(invalid("beam constants must be strictly positive"))
        }
    }

    /// Constraint status for breadth `x[0]` and height `x[1]`, in the order
    /// area, deflection, bending, shear, aspect ratio, buckling.
    pub fn constraints(&self, x: &[f64]) -> [bool; 6] {
        let (b, h) = (x[0], x[1]);
        if !(b > 0.0 && h > 0.0) {
            return [false; 6];
        }
        let l = self.beam_length;
        let f = self.load;
        let i_y = b * h.powi(3) / 12.0;
        let i_z = b.powi(3) * h / 12.0;
        let i_t = i_y + i_z;
        let deflection = f * l.powi(3) / (3.0 * self.youngs_modulus * i_y);
        let bending = 6.0 * f * l / (b * h * h);
        let shear = 1.5 * f / (b * h);
        let buckling = 4.0 / (l * l)
            * (self.shear_modulus * i_t * self.youngs_modulus * i_z / (1.0 - self.poisson_ratio.powi(2))).sqrt();
        [
            at_most(b * h, self.area_cap),
            at_most(deflection, self.deflection_cap),
            at_most(bending, self.yield_stress),
            at_most(shear, self.yield_stress / 2.0),
            at_most(h / b, self.aspect_cap),
            at_most(self.safety_factor * f, buckling),
        ]
    }

    pub fn label(&self, x: &[f64]) -> Label {
        if self.constraints(x).iter().all(|&c| c) {
            Label::Feasible
        } else {
            Label::Infeasible
        }
    }
}

/// The benchmark problems, as noiseless oracles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Problem {
    Branin,
    Hosaki,
    DoubleSphere(DoubleSphere),
    Nowacki(NowackiBeamParams),
}

/// Input-space bounds used by the bounded baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundsPreset {
    Tight,
    Loose,
    Insufficient,
}

/// How a problem's accuracy test set is generated.
#[derive(Debug, Clone, PartialEq)]
pub enum TestSetSpec {
    Grid { lower: Vec<f64>, upper: Vec<f64>, resolution: usize },
    Random { lower: Vec<f64>, upper: Vec<f64>, count: usize },
}

impl Problem {
    pub fn double_sphere(dim: usize) -> Result<Self> {
        DoubleSphere::new(dim).map(Problem::DoubleSphere)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Problem::Branin => "branin",
            Problem::Hosaki => "hosaki",
            Problem::DoubleSphere(_) => "double_sphere",
            Problem::Nowacki(_) => "nowacki",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Problem::DoubleSphere(p) => p.dim,
            _ => 2,
        }
    }

    pub fn truth(&self, x: &[f64]) -> Label {
        match self {
            Problem::Branin => Branin.classify(x),
            Problem::Hosaki => Hosaki.classify(x),
            Problem::DoubleSphere(p) => p.classify(x),
            Problem::Nowacki(p) => p.label(x),
        }
    }

    /// Kernel length scale used for this problem in the reference experiments.
    pub fn default_length_scale(&self) -> f64 {
        match self {
            Problem::Branin => 0.9,
            Problem::Hosaki => 0.4,
            Problem::DoubleSphere(_) => 0.5,
            Problem::Nowacki(_) => 0.005,
        }
    }

    pub fn default_initial_point(&self) -> Vec<f64> {
        match self {
            Problem::Branin | Problem::Hosaki => vec![3.0, 3.0],
            Problem::DoubleSphere(p) => vec![0.0; p.dim],
            Problem::Nowacki(_) => vec![0.05, 0.05],
        }
    }

    pub fn default_test_set(&self) -> TestSetSpec {
        match self {
            Problem::Branin => TestSetSpec::Grid {
                lower: vec![-13.0, -8.0],
                upper: vec![18.0, 23.0],
                resolution: 100,
            },
            Problem::Hosaki => TestSetSpec::Grid {
                lower: vec![-3.0, -3.5],
                upper: vec![9.0, 8.5],
                resolution: 100,
            },
            Problem::DoubleSphere(p) => {
                let lower = vec![-2.0; p.dim];
                let mut upper = vec![2.0; p.dim];
                upper[0] = 5.0;
                TestSetSpec::Random {
                    lower,
                    upper,
                    count: 10_000,
                }
            }
            Problem::Nowacki(_) => TestSetSpec::Grid {
                lower: vec![0.0, 0.1],
                upper: vec![0.02, 0.16],
                resolution: 100,
            },
        }
    }

    /// Reference bounds for the bounded baselines, where they exist.
    pub fn bounds(&self, preset: BoundsPreset) -> Option<BoundedBox> {
        let (lower, upper) = match (self, preset) {
            (Problem::Branin, BoundsPreset::Tight) => (vec![-9.0, -7.0], vec![14.0, 17.0]),
            (Problem::Branin, BoundsPreset::Loose) => (vec![-14.0, -12.0], vec![19.0, 22.0]),
            (Problem::Branin, BoundsPreset::Insufficient) => (vec![-4.0, -2.0], vec![9.0, 12.0]),
            (Problem::Hosaki, BoundsPreset::Tight) => (vec![0.0, 0.0], vec![6.0, 5.0]),
            (Problem::Hosaki, BoundsPreset::Loose) => (vec![-2.5, -3.0], vec![8.5, 8.0]),
            (Problem::Hosaki, BoundsPreset::Insufficient) => (vec![1.0, 0.0], vec![6.0, 4.5]),
            (Problem::DoubleSphere(p), BoundsPreset::Tight) => {
                let lower = vec![-1.5; p.dim];
                let mut upper = vec![1.5; p.dim];
                upper[0] = 4.5;
                (lower, upper)
            }
            _ => return None,
        };
        BoundedBox::new(lower, upper).ok()
    }

    /// Gaussian-noise view of the problem, for problems with a scalar level set.
    pub fn level_set(&self) -> Option<Box<dyn LevelSet + Send + Sync>> {
        match *self {
            Problem::Branin => Some(Box::new(Branin)),
            Problem::Hosaki => Some(Box::new(Hosaki)),
            Problem::DoubleSphere(p) => Some(Box::new(p)),
            Problem::Nowacki(_) => None,
        }
    }
}

impl Oracle for Problem {
    fn dim(&self) -> usize {
        Problem::dim(self)
    }
    fn label(&mut self, x: &[f64]) -> Label {
        self.truth(x)
    }
}

/// Flips each label of `inner` independently with probability `p`.
pub struct BernoulliNoise<O> {
    inner: O,
    p: f64,
    rng: ChaCha8Rng,
}

impl<O: Oracle> BernoulliNoise<O> {
    pub fn new(inner: O, p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!("flip probability must be in [0, 1], got {p}")));
        }
        Ok(Self {
            inner,
            p,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }
}

impl<O: Oracle> Oracle for BernoulliNoise<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn label(&mut self, x: &[f64]) -> Label {
        let y = self.inner.label(x);
        if self.rng.random::<f64>() < self.p {
            y.flipped()
        } else {
            y
        }
    }
}

/// Thresholds `value(x) + s * N(0, 1)` instead of `value(x)`; domain
/// constraints are not perturbed.
pub struct GaussianNoise<L> {
    level_set: L,
    scale: f64,
    rng: ChaCha8Rng,
}

impl<L: LevelSet> GaussianNoise<L> {
    pub fn new(level_set: L, scale: f64, seed: u64) -> Result<Self> {
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(invalid(format!("noise scale must be non-negative, got {scale}")));
        }
        Ok(Self {
            level_set,
            scale,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }
}

impl<L: LevelSet> Oracle for GaussianNoise<L> {
    fn dim(&self) -> usize {
        self.level_set.dim()
    }
    fn label(&mut self, x: &[f64]) -> Label {
        let e: f64 = self.rng.sample(StandardNormal);
        if self.level_set.in_domain(x) && self.level_set.value(x) + self.scale * e <= self.level_set.threshold() {
            Label::Feasible
        } else {
            Label::Infeasible
        }
    }
}

impl<L: LevelSet + ?Sized> LevelSet for Box<L> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn threshold(&self) -> f64 {
        (**self).threshold()
    }
    fn in_domain(&self, x: &[f64]) -> bool {
        (**self).in_domain(x)
    }
}

pub fn bernoulli_noise<O: Oracle>(oracle: O, p: f64, seed: u64) -> Result<BernoulliNoise<O>> {
    BernoulliNoise::new(oracle, p, seed)
}

pub fn gaussian_noise<L: LevelSet>(level_set: L, s: f64, seed: u64) -> Result<GaussianNoise<L>> {
    GaussianNoise::new(level_set, s, seed)
}
