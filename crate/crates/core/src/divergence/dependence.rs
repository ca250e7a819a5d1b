use ndarray::{Array2, ArrayView2};

use super::{check_finite, clamp_nonneg, DivergenceResult, PROB_CLIP};
use crate::error::{invalid, Error, Result};
use crate::kernels::sq_dist;

/// Plug-in mutual information between a soft Bernoulli prediction and a
/// binary group label (the prejudice index).
///
/// The joint table is `p(ŷ=1, s) = (1/N) Σ_{i: sᵢ = s} zᵢ` and
/// `p(ŷ=0, s) = (1/N) Σ_{i: sᵢ = s} (1 - zᵢ)`. `grad_p` holds `∂I/∂zᵢ`;
/// `grad_q` is all zeros (labels are discrete).
pub fn pr_mutual_information(z: &[f64], s: &[u32]) -> Result<DivergenceResult> {
    if z.len() != s.len() {
        return invalid(format!("length mismatch: {} predictions vs {} groups", z.len(), s.len()));
    }
    if let Some(bad) = s.iter().find(|&&g| g > 1) {
        return invalid(format!("prejudice index expects binary groups, found {bad}"));
    }
    let n = z.len() as f64;
    let mut count = [0usize; 2];
    let mut joint = [[0.0f64; 2]; 2]; // [yhat][s]
    let mut clipped = Vec::with_capacity(z.len());
    for (&zi, &si) in z.iter().zip(s) {
        let c = zi.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
        clipped.push(c);
        count[si as usize] += 1;
        joint[1][si as usize] += c;
        joint[0][si as usize] += 1.0 - c;
    }
    if count[0] == 0 || count[1] == 0 {
        return Err(Error::GroupMissing("prejudice index needs both groups in the batch".into()));
    }
    for row in joint.iter_mut() {
        for cell in row.iter_mut() {
            *cell /= n;
        }
    }
    let p_s = [count[0] as f64 / n, count[1] as f64 / n];
    let p_y = [joint[0][0] + joint[0][1], joint[1][0] + joint[1][1]];

    let mut value = 0.0;
    for yh in 0..2 {
        for g in 0..2 {
            let pj = joint[yh][g];
            value += pj * (pj / (p_y[yh] * p_s[g])).ln();
        }
    }
    let value = check_finite("prejudice index", value)?;

    let marginal_logit = (p_y[1] / p_y[0]).ln();
    let group_logit = [
        (joint[1][0] / joint[0][0]).ln(),
        (joint[1][1] / joint[0][1]).ln(),
    ];
    let grad_p = Array2::from_shape_fn((z.len(), 1), |(i, _)| {
        if z[i] < PROB_CLIP || z[i] > 1.0 - PROB_CLIP {
            0.0
        } else {
            (group_logit[s[i] as usize] - marginal_logit) / n
        }
    });
    Ok(DivergenceResult {
        value: clamp_nonneg(value),
        grad_p,
        grad_q: Array2::zeros((z.len(), 1)),
    })
}

fn distance_matrix(x: ArrayView2<f64>) -> Array2<f64> {
    let n = x.nrows();
    let x = x.as_standard_layout();
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let d = sq_dist(x.row(i).as_slice().unwrap(), x.row(j).as_slice().unwrap()).sqrt();
            a[[i, j]] = d;
            a[[j, i]] = d;
        }
    }
    a
}

/// Squared empirical distance covariance `(1/N²) Σ A_ij B_ij` of paired
/// samples, with `A`, `B` the double-centered distance matrices.
///
/// Distances are not differentiable at coincident points; the zero
/// subgradient is used there.
pub fn distance_covariance(x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<DivergenceResult> {
    let n = x.nrows();
    if n != y.nrows() {
        return invalid(format!("distance covariance needs paired samples: {} vs {} rows", n, y.nrows()));
    }
    if n < 2 {
        return invalid("distance covariance needs at least 2 paired samples");
    }
    let a = distance_matrix(x);
    let b = distance_matrix(y);
    let a_c = super::kernel::double_center(&a);
    let b_c = super::kernel::double_center(&b);
    let nn = (n * n) as f64;
    let value = check_finite("distance covariance", (&a_c * &b_c).sum() / nn)?;

    // Σ A∘B = Σ a∘B because double centering is an orthogonal projection,
    // so ∂/∂a_ij = B_ij.
    let grad_side = |m: ArrayView2<f64>, dist: &Array2<f64>, other: &Array2<f64>| {
        let m = m.as_standard_layout();
        let mut g = Array2::zeros(m.raw_dim());
        for i in 0..n {
            for j in 0..n {
                let dij = dist[[i, j]];
                if dij > 0.0 {
                    let c = 2.0 * other[[i, j]] / (dij * nn);
                    for k in 0..m.ncols() {
                        g[[i, k]] += c * (m[[i, k]] - m[[j, k]]);
                    }
                }
            }
        }
        g
    };
    let grad_p = grad_side(x, &a, &b_c);
    let grad_q = grad_side(y, &b, &a_c);
    Ok(DivergenceResult { value: clamp_nonneg(value), grad_p, grad_q })
}
