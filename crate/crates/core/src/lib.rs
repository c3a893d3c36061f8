//! Active expansion sampling.
//!
//! Identifies the feasible region of an expensive binary oracle without a
//! bounding box. A Gaussian-process classifier (probit likelihood, Laplace
//! approximation) models the labels; each query is drawn from a small pool
//! generated around the previous query, so the sampled region grows outward
//! from the initial point as far as the feasible set reaches.
//!
//! ```
//! use aes_core::{run, AesConfig, KernelConfig, Problem};
//!
//! let mut config = AesConfig::new(vec![3.0, 3.0], KernelConfig::new(0.9)?);
//! config.budget = 10;
//! let log = run(&config, Problem::Branin)?;
//! assert_eq!(log.records.len(), 11);
//! # Ok::<(), aes_core::Error>(())
//! ```

pub mod acquisition;
pub mod baselines;
pub mod engine;
pub mod error;
pub mod evaluation;
pub mod gpc;
pub mod normal;
pub mod problems;
pub mod sampling;

pub use acquisition::{
    aes_constraint_satisfied, epsilon_margin_probability, misclassification_loss, straddle_score, AcquisitionParams,
};
pub use baselines::{straddle_run, BoundedBox, BoundedSampler, Straddle};
pub use engine::{
    beta_coefficient, compute_beta, compute_gamma, detect_stage, gamma_coefficient, run, select_query, AesConfig,
    AesState, Pool, QueryRecord, RunLog, Stage,
};
pub use error::{Error, Result};
pub use evaluation::{
    explored_region_f1, f1_curve, f1_score, global_f1, grid_test_set, random_test_set, CurvePoint, TestSet,
};
pub use gpc::{fit, GpcFit, KernelConfig, Label, LabeledSet, Prediction};
pub use problems::{
    bernoulli_noise, gaussian_noise, BernoulliNoise, BoundsPreset, FnOracle, GaussianNoise, LevelSet, NowackiBeamParams,
    Oracle, Problem, TestSetSpec,
};
