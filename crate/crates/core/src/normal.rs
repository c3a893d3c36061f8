//! Standard normal helpers.
//!
//! `Φ` goes through `erfc`, which keeps the absolute error near machine
//! precision over the whole real line. The log-CDF and the inverse Mills
//! ratio switch to asymptotic series deep in the lower tail where `erfc`
//! underflows.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

const LOWER_TAIL: f64 = -30.0;

/// Standard normal density.
pub fn pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF.
pub fn cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// `ln Φ(z)`.
pub fn ln_cdf(z: f64) -> f64 {
    if z < LOWER_TAIL {
        let x = -z;
        -0.5 * x * x - x.ln() - 0.5 * (2.0 * PI).ln() + (1.0 - 1.0 / (x * x) + 3.0 / x.powi(4)).ln()
    } else if z < 0.0 {
        cdf(z).ln()
    } else {
        (-0.5 * libm::erfc(z * FRAC_1_SQRT_2)).ln_1p()
    }
}

/// `φ(z) / Φ(z)`, the inverse Mills ratio.
pub fn pdf_over_cdf(z: f64) -> f64 {
    if z < LOWER_TAIL {
        let x = -z;
        let x2 = x * x;
        // Φ(-x)/φ(x) ~ (1/x)(1 - 1/x² + 3/x⁴ - 15/x⁶)
        x / (1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2))
    } else {
        pdf(z) / cdf(z)
    }
}
