//! Point-wise scores computed from a posterior prediction.

use crate::error::{invalid, Result};
use crate::gpc::{Label, Prediction};
use crate::normal;

/// Confidence multiplier of the straddle heuristic (two-sided 95% interval).
pub const STRADDLE_Z: f64 = 1.96;

/// Margin `epsilon` and density factor `eta`; the threshold `tau` is always
/// derived as `Φ(-eta * epsilon)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionParams {
    epsilon: f64,
    eta: f64,
}

impl AcquisitionParams {
    pub fn new(epsilon: f64, eta: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(eta.is_finite() && eta >= 1.0) {
            return Err(invalid(format!("eta must be at least 1, got {eta}")));
        }
        Ok(Self { epsilon, eta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn tau(&self) -> f64 {
        normal::cdf(-self.eta * self.epsilon)
    }
}

/// Probability that the latent value lies beyond the margin on the wrong
/// side of the predicted class: `Φ(-(|mean| + ε) / sqrt(V))`.
pub fn epsilon_margin_probability(pred: &Prediction, params: &AcquisitionParams) -> f64 {
    normal::cdf(-(pred.mean.abs() + params.epsilon) / pred.variance.sqrt())
}

/// `max(0, -y f)`.
pub fn misclassification_loss(latent_value: f64, true_label: Label) -> f64 {
    (-true_label.sign() * latent_value).max(0.0)
}

/// The query constraint `eta ε sqrt(V) - |mean| >= ε`, equivalent to
/// `epsilon_margin_probability >= tau`.
pub fn aes_constraint_satisfied(pred: &Prediction, params: &AcquisitionParams) -> bool {
    params.eta * params.epsilon * pred.variance.sqrt() - pred.mean.abs() >= params.epsilon
}

/// `1.96 sqrt(V) - |mean|`.
pub fn straddle_score(pred: &Prediction) -> f64 {
    STRADDLE_Z * pred.variance.sqrt() - pred.mean.abs()
}
