use ndarray::{Array2, ArrayView2};

use super::{check_finite, clamp_nonneg, DivergenceResult};
use crate::error::{invalid, Result};

/// Variance floor applied to fitted group variances.
pub const KL_VAR_FLOOR: f64 = 1e-6;

fn scalar_column(name: &str, x: ArrayView2<f64>, min_rows: usize) -> Result<Vec<f64>> {
    if x.ncols() != 1 {
        return invalid(format!("{name} expects scalar samples (d = 1), got d = {}", x.ncols()));
    }
    if x.nrows() < min_rows {
        return invalid(format!(
            "{name} needs at least {min_rows} samples per side, got {}",
            x.nrows()
        ));
    }
    Ok(x.column(0).to_vec())
}

/// `|mean(P) - mean(Q)|` for scalar samples. The subgradient at a tie is 0.
pub fn mean_disparity(p: ArrayView2<f64>, q: ArrayView2<f64>) -> Result<DivergenceResult> {
    let ps = scalar_column("mean disparity", p, 1)?;
    let qs = scalar_column("mean disparity", q, 1)?;
    let (n1, n2) = (ps.len() as f64, qs.len() as f64);
    let diff = ps.iter().sum::<f64>() / n1 - qs.iter().sum::<f64>() / n2;
    let sign = if diff > 0.0 {
        1.0
    } else if diff < 0.0 {
        -1.0
    } else {
        0.0
    };
    Ok(DivergenceResult {
        value: check_finite("mean disparity", diff.abs())?,
        grad_p: Array2::from_elem((ps.len(), 1), sign / n1),
        grad_q: Array2::from_elem((qs.len(), 1), -sign / n2),
    })
}

/// Population mean and variance (1/N normalization).
pub fn sample_moments(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// KL(p‖q) between Gaussians fitted to each side by moment matching.
///
/// Gradients flow through the fitted means and variances; a floored variance
/// passes no gradient.
pub fn kl_gaussian_moment(p: ArrayView2<f64>, q: ArrayView2<f64>) -> Result<DivergenceResult> {
    let ps = scalar_column("Gaussian-moment KL", p, 2)?;
    let qs = scalar_column("Gaussian-moment KL", q, 2)?;
    let (mp, vp_raw) = sample_moments(&ps);
    let (mq, vq_raw) = sample_moments(&qs);
    let vp = vp_raw.max(KL_VAR_FLOOR);
    let vq = vq_raw.max(KL_VAR_FLOOR);
    let delta = mq - mp;

    let value = 0.5 * (vp / vq - 1.0 + delta * delta / vq + (vq / vp).ln());
    let value = check_finite("Gaussian-moment KL", value)?;

    let d_mp = -delta / vq;
    let d_mq = delta / vq;
    let d_vp = if vp_raw > KL_VAR_FLOOR { 0.5 * (1.0 / vq - 1.0 / vp) } else { 0.0 };
    let d_vq = if vq_raw > KL_VAR_FLOOR {
        0.5 * (1.0 / vq - (vp + delta * delta) / (vq * vq))
    } else {
        0.0
    };

    let (n1, n2) = (ps.len() as f64, qs.len() as f64);
    let grad_p = Array2::from_shape_fn((ps.len(), 1), |(i, _)| {
        d_mp / n1 + d_vp * 2.0 * (ps[i] - mp) / n1
    });
    let grad_q = Array2::from_shape_fn((qs.len(), 1), |(i, _)| {
        d_mq / n2 + d_vq * 2.0 * (qs[i] - mq) / n2
    });
    Ok(DivergenceResult { value: clamp_nonneg(value), grad_p, grad_q })
}
