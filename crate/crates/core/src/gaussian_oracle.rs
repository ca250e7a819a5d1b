//! Closed-form Gaussian CS and KL divergences, the CS ≤ KL check, and a KDE
//! quadrature oracle for the empirical CS estimator.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};

/// Largest dimension accepted by the closed forms.
pub const MAX_DIM: usize = 16;

/// Slack allowed in `D_CS ≤ min(D_KL(p;q), D_KL(q;p))`.
pub const INEQUALITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    /// `log |Σ|`
    log_det: f64,
}

impl GaussianParams {
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let d = mu.len();
        if d == 0 || d > MAX_DIM {
            return invalid(format!("dimension must be in 1..={MAX_DIM}, got {d}"));
        }
        if sigma.nrows() != d || sigma.ncols() != d {
            return invalid(format!(
                "covariance is {}x{}, expected {d}x{d}",
                sigma.nrows(),
                sigma.ncols()
            ));
        }
        for i in 0..d {
            for j in (i + 1)..d {
                if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-12 {
                    return invalid("covariance is not symmetric");
                }
            }
        }
        let log_det = log_det_spd(&sigma)?;
        Ok(GaussianParams { mu, sigma, log_det })
    }

    pub fn univariate(mean: f64, variance: f64) -> Result<Self> {
        Self::new(DVector::from_element(1, mean), DMatrix::from_element(1, 1, variance))
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.sigma
    }
}

fn log_det_spd(m: &DMatrix<f64>) -> Result<f64> {
    match m.clone().cholesky() {
        Some(c) => Ok(2.0 * c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>()),
        None => invalid("covariance is not positive definite"),
    }
}

fn check_dims(p: &GaussianParams, q: &GaussianParams) -> Result<()> {
    if p.dim() != q.dim() {
        return invalid(format!("dimension mismatch: {} vs {}", p.dim(), q.dim()));
    }
    Ok(())
}

/// `½ Δᵀ(Σp+Σq)⁻¹Δ + ½ log(|Σp+Σq| / (2^d √(|Σp||Σq|)))`
pub fn cs_closed_form(p: &GaussianParams, q: &GaussianParams) -> Result<f64> {
    check_dims(p, q)?;
    let d = p.dim() as f64;
    let sum = &p.sigma + &q.sigma;
    let chol = match sum.clone().cholesky() {
        Some(c) => c,
        None => return invalid("Σp + Σq is not positive definite"),
    };
    let delta = &q.mu - &p.mu;
    let mahal = delta.dot(&chol.solve(&delta));
    let log_det_sum = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let log_term = log_det_sum - d * std::f64::consts::LN_2 - 0.5 * (p.log_det + q.log_det);
    Ok((0.5 * mahal + 0.5 * log_term).max(0.0))
}

/// `½ (tr(Σq⁻¹Σp) - d + ΔᵀΣq⁻¹Δ + log(|Σq|/|Σp|))`
pub fn kl_closed_form(p: &GaussianParams, q: &GaussianParams) -> Result<f64> {
    check_dims(p, q)?;
    let d = p.dim() as f64;
    let chol_q = match q.sigma.clone().cholesky() {
        Some(c) => c,
        None => return invalid("Σq is not positive definite"),
    };
    let trace = chol_q.solve(&p.sigma).trace();
    let delta = &q.mu - &p.mu;
    let mahal = delta.dot(&chol_q.solve(&delta));
    Ok((0.5 * (trace - d + mahal + q.log_det - p.log_det)).max(0.0))
}

/// Per-eigenvalue covariance gap between CS and KL,
/// `g(λ) = -log 2 + log(1+λ) + ½ log λ - λ + 1`; non-positive with maximum
/// `g(1) = 0`.
pub fn covariance_gap_term(lambda: f64) -> f64 {
    -std::f64::consts::LN_2 + (1.0 + lambda).ln() + 0.5 * lambda.ln() - lambda + 1.0
}

#[derive(Debug, Clone)]
pub struct InequalityInstance {
    pub p: GaussianParams,
    pub q: GaussianParams,
    pub cs: f64,
    pub kl_pq: f64,
    pub kl_qp: f64,
}

impl InequalityInstance {
    /// `D_CS - min(D_KL(p;q), D_KL(q;p))`; positive means violated.
    pub fn excess(&self) -> f64 {
        self.cs - self.kl_pq.min(self.kl_qp)
    }
}

#[derive(Debug, Clone)]
pub struct InequalityReport {
    pub trials: usize,
    /// Largest positive excess, 0 if none.
    pub max_violation: f64,
    /// Instance with the largest excess (even when it is not a violation).
    pub worst: Option<InequalityInstance>,
}

impl InequalityReport {
    pub fn passed(&self) -> bool {
        self.max_violation <= INEQUALITY_SLACK
    }
}

fn random_gaussian(rng: &mut ChaCha8Rng, d: usize) -> Result<GaussianParams> {
    let mu = DVector::from_fn(d, |_, _| rng.random_range(-3.0..=3.0));
    let a = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut sigma = &a * a.transpose() + DMatrix::identity(d, d) * 0.1;
    // exact symmetry
    for i in 0..d {
        for j in (i + 1)..d {
            sigma[(j, i)] = sigma[(i, j)];
        }
    }
    GaussianParams::new(mu, sigma)
}

/// Checks `D_CS(p;q) ≤ min(D_KL(p;q), D_KL(q;p))` on `trials` random pairs
/// for every dimension in `dims`. The first pair of each dimension is the
/// degenerate `p = q` case.
pub fn verify_cs_kl_inequality(trials: usize, dims: &[usize], seed: u64) -> Result<InequalityReport> {
    if trials == 0 {
        return invalid("trials must be at least 1");
    }
    if dims.is_empty() {
        return invalid("at least one dimension is required");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0;
    let mut worst: Option<InequalityInstance> = None;
    for &d in dims {
        for t in 0..trials {
            let p = random_gaussian(&mut rng, d)?;
            let q = if t == 0 { p.clone() } else { random_gaussian(&mut rng, d)? };
            let inst = InequalityInstance {
                cs: cs_closed_form(&p, &q)?,
                kl_pq: kl_closed_form(&p, &q)?,
                kl_qp: kl_closed_form(&q, &p)?,
                p,
                q,
            };
            if worst.as_ref().is_none_or(|w| inst.excess() > w.excess()) {
                worst = Some(inst);
            }
            total += 1;
        }
    }
    let max_violation = worst.as_ref().map_or(0.0, |w| w.excess().max(0.0));
    Ok(InequalityReport { trials: total, max_violation, worst })
}

/// Uniform 1-d grid for trapezoidal quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

/// Minimum number of grid points accepted by [`kde_quadrature_cs`].
pub const MIN_GRID_POINTS: usize = 2048;

/// KDE density allowed at the grid boundary.
pub const BOUNDARY_DENSITY: f64 = 1e-8;

impl QuadratureGrid {
    /// A grid extending 8σ beyond the pooled sample range.
    pub fn covering(p: &[f64], q: &[f64], sigma: f64, points: usize) -> Self {
        let lo = p.iter().chain(q).copied().fold(f64::INFINITY, f64::min);
        let hi = p.iter().chain(q).copied().fold(f64::NEG_INFINITY, f64::max);
        QuadratureGrid { lo: lo - 8.0 * sigma, hi: hi + 8.0 * sigma, points }
    }
}

fn kde(samples: &[f64], sigma: f64, x: f64) -> f64 {
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt() * samples.len() as f64);
    samples
        .iter()
        .map(|s| (-(x - s) * (x - s) / (2.0 * sigma * sigma)).exp())
        .sum::<f64>()
        * norm
}

/// CS divergence between the Gaussian KDEs of `p` and `q` (bandwidth
/// `sigma`), integrated by the trapezoidal rule on `grid`.
///
/// The empirical estimator with kernel bandwidth `√2·sigma` targets the same
/// quantity.
pub fn kde_quadrature_cs(p: &[f64], q: &[f64], sigma: f64, grid: QuadratureGrid) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return invalid("sample sets must be non-empty");
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return invalid(format!("KDE bandwidth must be positive, got {sigma}"));
    }
    if grid.points < MIN_GRID_POINTS {
        return invalid(format!("grid needs at least {MIN_GRID_POINTS} points, got {}", grid.points));
    }
    if !(grid.hi > grid.lo) {
        return invalid("grid upper bound must exceed lower bound");
    }
    for x in [grid.lo, grid.hi] {
        let (dp, dq) = (kde(p, sigma, x), kde(q, sigma, x));
        if dp > BOUNDARY_DENSITY || dq > BOUNDARY_DENSITY {
            return invalid(format!(
                "grid too narrow: density {:.3e} at boundary {x}",
                dp.max(dq)
            ));
        }
    }
    let h = (grid.hi - grid.lo) / (grid.points - 1) as f64;
    let (mut ipp, mut iqq, mut ipq) = (0.0, 0.0, 0.0);
    for k in 0..grid.points {
        let x = grid.lo + h * k as f64;
        let w = if k == 0 || k == grid.points - 1 { 0.5 * h } else { h };
        let (dp, dq) = (kde(p, sigma, x), kde(q, sigma, x));
        ipp += w * dp * dp;
        iqq += w * dq * dq;
        ipq += w * dp * dq;
    }
    Ok((ipp.ln() + iqq.ln() - 2.0 * ipq.ln()).max(0.0))
}

/// Largest disagreement found by [`verify_quadrature_agreement`].
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureReport {
    pub instances: usize,
    pub max_abs_error: f64,
    /// `(instance index, estimator value, quadrature value)` of the worst case.
    pub worst: Option<(usize, f64, f64)>,
}

/// Draws `n` points from an equal mixture of `N(m₁, s₁²)` and `N(m₂, s₂²)`.
fn mixture_sample(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let comps: Vec<(f64, f64)> =
        (0..2).map(|_| (rng.random_range(-2.0..2.0), rng.random_range(0.3..1.5))).collect();
    (0..n)
        .map(|_| {
            let (m, s) = comps[rng.random_range(0..2)];
            m + s * rng.sample::<f64, _>(StandardNormal)
        })
        .collect()
}

/// Compares the sample CS estimator (Gaussian kernel of width `√2·sigma`)
/// with trapezoidal CS of the width-`sigma` KDEs on `instances` seeded 1-d
/// problems alternating between 50 and 200 points per side.
pub fn verify_quadrature_agreement(instances: usize, sigma: f64, points: usize, seed: u64) -> Result<QuadratureReport> {
    use crate::divergence::cs_divergence_value;
    use crate::kernels::KernelSpec;

    if instances == 0 {
        return invalid("instances must be at least 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = KernelSpec::gaussian(std::f64::consts::SQRT_2 * sigma);
    let mut worst: Option<(usize, f64, f64)> = None;
    for k in 0..instances {
        let n = if k % 2 == 0 { 50 } else { 200 };
        let p = mixture_sample(&mut rng, n);
        let q = mixture_sample(&mut rng, n);
        let col = |v: &[f64]| ndarray::Array2::from_shape_vec((v.len(), 1), v.to_vec()).expect("column shape");
        let est = cs_divergence_value(col(&p).view(), col(&q).view(), &spec)?;
        let quad = kde_quadrature_cs(&p, &q, sigma, QuadratureGrid::covering(&p, &q, sigma, points))?;
        if worst.is_none_or(|(_, e, qv)| (est - quad).abs() > (e - qv).abs()) {
            worst = Some((k, est, quad));
        }
    }
    let max_abs_error = worst.map_or(0.0, |(_, e, q)| (e - q).abs());
    Ok(QuadratureReport { instances, max_abs_error, worst })
}
