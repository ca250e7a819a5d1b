//! Helpers shared by the integration tests.
#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const FD_STEP: f64 = 1e-5;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, shift: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| shift + rng.sample::<f64, _>(StandardNormal))
}

pub fn column(values: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((values.len(), 1), values.to_vec()).unwrap()
}

/// Central finite difference of `f` along every entry of `x`.
pub fn finite_difference<F: FnMut(&Array2<f64>) -> f64>(x: &Array2<f64>, mut f: F) -> Array2<f64> {
    let mut out = Array2::zeros(x.raw_dim());
    let mut probe = x.clone();
    for idx in ndarray::indices(x.raw_dim()) {
        let orig = probe[idx];
        probe[idx] = orig + FD_STEP;
        let up = f(&probe);
        probe[idx] = orig - FD_STEP;
        let down = f(&probe);
        probe[idx] = orig;
        out[idx] = (up - down) / (2.0 * FD_STEP);
    }
    out
}

/// Largest mismatch between analytic and numeric partials, measured
/// relatively, or 0 for pairs that agree to `abs_tol` in absolute terms.
pub fn worst_relative_error(analytic: &[f64], numeric: &[f64], abs_tol: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| {
            let diff = (a - n).abs();
            if diff <= abs_tol {
                0.0
            } else {
                diff / a.abs().max(n.abs())
            }
        })
        .fold(0.0, f64::max)
}
