//! Differentiable discrepancy and dependence estimators.
//!
//! Every estimator returns a [`DivergenceResult`] holding the value and its
//! exact partial derivatives with respect to each coordinate of each input
//! observation.

mod dependence;
mod kernel;
mod moments;

use ndarray::Array2;

pub use dependence::{distance_covariance, pr_mutual_information};
pub use kernel::{cs_divergence, cs_divergence_value, hsic, mmd_squared};
pub use moments::{kl_gaussian_moment, mean_disparity, sample_moments, KL_VAR_FLOOR};

/// Absolute slack below which negative rounding is clamped to zero.
pub const EPS_NUM: f64 = 1e-10;

/// Probabilities are clipped into `[PROB_CLIP, 1 - PROB_CLIP]` before logs.
pub const PROB_CLIP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceResult {
    pub value: f64,
    /// `∂value/∂p`, same shape as the first input.
    pub grad_p: Array2<f64>,
    /// `∂value/∂q`, same shape as the second input.
    pub grad_q: Array2<f64>,
}

pub(crate) fn clamp_nonneg(v: f64) -> f64 {
    if v < 0.0 {
        0.0
    } else {
        v
    }
}

pub(crate) fn check_finite(name: &str, v: f64) -> crate::Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(crate::Error::Domain(format!("{name} is not finite ({v})")))
    }
}
