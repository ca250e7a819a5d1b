//! Positive-definite kernels, normalized Gram sums and bandwidth selection.
//!
//! A sample set is an `N x d` matrix whose rows are observations. All kernels
//! use the Euclidean norm.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Work size (pairs) above which Gram row sums are computed in parallel.
const PAR_THRESHOLD: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// `exp(-||u-v||² / (2σ²))`
    GaussianRbf,
    /// `exp(-||u-v|| / σ)`
    Laplacian,
    /// `(γ⟨u,v⟩ + 1)²` with `γ = 1/σ`
    Polynomial2,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::GaussianRbf => "rbf",
            KernelFamily::Laplacian => "laplacian",
            KernelFamily::Polynomial2 => "poly2",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rbf" | "gaussian" | "gaussian_rbf" => Ok(KernelFamily::GaussianRbf),
            "laplacian" => Ok(KernelFamily::Laplacian),
            "poly2" | "polynomial" | "polynomial_deg2" => Ok(KernelFamily::Polynomial2),
            other => invalid(format!("unknown kernel family `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "sigma")]
pub enum Bandwidth {
    Fixed(f64),
    /// Median pairwise distance of the pooled samples, resolved per call.
    MedianHeuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: Bandwidth,
}

impl KernelSpec {
    pub fn fixed(family: KernelFamily, sigma: f64) -> Self {
        KernelSpec { family, bandwidth: Bandwidth::Fixed(sigma) }
    }

    pub fn gaussian(sigma: f64) -> Self {
        Self::fixed(KernelFamily::GaussianRbf, sigma)
    }

    pub fn median(family: KernelFamily) -> Self {
        KernelSpec { family, bandwidth: Bandwidth::MedianHeuristic }
    }

    pub fn validate(&self) -> Result<()> {
        if let Bandwidth::Fixed(s) = self.bandwidth {
            check_sigma(s)?;
        }
        Ok(())
    }

    /// Resolves the bandwidth against the pooled sample sets `p ∪ q`.
    pub fn resolve(&self, p: ArrayView2<f64>, q: ArrayView2<f64>) -> Result<Kernel> {
        match self.bandwidth {
            Bandwidth::Fixed(s) => Kernel::new(self.family, s),
            Bandwidth::MedianHeuristic => Kernel::new(self.family, median_heuristic(p, q)?),
        }
    }

    /// Resolves the bandwidth against a single sample set.
    pub fn resolve_single(&self, x: ArrayView2<f64>) -> Result<Kernel> {
        match self.bandwidth {
            Bandwidth::Fixed(s) => Kernel::new(self.family, s),
            Bandwidth::MedianHeuristic => Kernel::new(self.family, median_pairwise_distance(x)?),
        }
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        invalid(format!("kernel bandwidth must be positive and finite, got {sigma}"))
    }
}

/// A kernel with its bandwidth resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    family: KernelFamily,
    sigma: f64,
}

impl Kernel {
    pub fn new(family: KernelFamily, sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(Kernel { family, sigma })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    #[inline]
    pub fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        match self.family {
            // Rounded exactly as in `accumulate_grad`, so value-only and
            // gradient passes produce bit-identical Gram sums.
            KernelFamily::GaussianRbf => {
                let s2 = self.sigma * self.sigma;
                (-sq_dist(u, v) / (2.0 * s2)).exp()
            }
            KernelFamily::Laplacian => (-sq_dist(u, v).sqrt() / self.sigma).exp(),
            KernelFamily::Polynomial2 => {
                let t = dot(u, v) / self.sigma + 1.0;
                t * t
            }
        }
    }

    /// Adds `weight * ∂k(u,v)/∂u` into `out` and returns `k(u,v)`.
    ///
    /// The Laplacian kernel is not differentiable at `u = v`; the zero
    /// subgradient is used there.
    #[inline]
    pub fn accumulate_grad(&self, u: &[f64], v: &[f64], weight: f64, out: &mut [f64]) -> f64 {
        match self.family {
            KernelFamily::GaussianRbf => {
                let s2 = self.sigma * self.sigma;
                let k = (-sq_dist(u, v) / (2.0 * s2)).exp();
                let c = -weight * k / s2;
                for ((o, a), b) in out.iter_mut().zip(u).zip(v) {
                    *o += c * (a - b);
                }
                k
            }
            KernelFamily::Laplacian => {
                let r = sq_dist(u, v).sqrt();
                let k = (-r / self.sigma).exp();
                if r > 0.0 {
                    let c = -weight * k / (self.sigma * r);
                    for ((o, a), b) in out.iter_mut().zip(u).zip(v) {
                        *o += c * (a - b);
                    }
                }
                k
            }
            KernelFamily::Polynomial2 => {
                let t = dot(u, v) / self.sigma + 1.0;
                let c = weight * 2.0 * t / self.sigma;
                for (o, b) in out.iter_mut().zip(v) {
                    *o += c * b;
                }
                t * t
            }
        }
    }
}

#[inline]
pub(crate) fn sq_dist(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[inline]
fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Evaluates `k(u, v)` for a kernel spec with a fixed bandwidth.
pub fn kernel_eval(u: &[f64], v: &[f64], spec: &KernelSpec) -> Result<f64> {
    if u.len() != v.len() {
        return invalid(format!("dimension mismatch: {} vs {}", u.len(), v.len()));
    }
    let sigma = match spec.bandwidth {
        Bandwidth::Fixed(s) => s,
        Bandwidth::MedianHeuristic => {
            return invalid("kernel_eval needs a resolved (fixed) bandwidth");
        }
    };
    Ok(Kernel::new(spec.family, sigma)?.eval(u, v))
}

/// The three normalized double sums behind the CS and MMD estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramSums {
    /// `(1/N1²) Σ k(pᵢ, pⱼ)`
    pub pp: f64,
    /// `(1/N2²) Σ k(qᵢ, qⱼ)`
    pub qq: f64,
    /// `(1/(N1 N2)) Σ k(pᵢ, qⱼ)`
    pub pq: f64,
}

pub(crate) fn check_pair(p: ArrayView2<f64>, q: ArrayView2<f64>) -> Result<()> {
    if p.nrows() == 0 || q.nrows() == 0 {
        return invalid("sample sets must be non-empty");
    }
    if p.ncols() != q.ncols() {
        return invalid(format!("dimension mismatch: {} vs {}", p.ncols(), q.ncols()));
    }
    if p.ncols() == 0 {
        return invalid("sample dimension must be at least 1");
    }
    Ok(())
}

/// Row sums of the kernel block `K(a, b)` and, optionally, the gradient of
/// each row sum with respect to its `a` row.
pub(crate) struct BlockSums {
    pub rows: Vec<f64>,
    pub grads: Option<Array2<f64>>,
}

impl BlockSums {
    pub fn total(&self) -> f64 {
        self.rows.iter().sum()
    }
}

pub(crate) fn block_sums(
    a: ArrayView2<f64>,
    b: ArrayView2<f64>,
    kernel: &Kernel,
    with_grad: bool,
) -> BlockSums {
    let a = a.as_standard_layout();
    let b = b.as_standard_layout();
    let d = a.ncols();
    let a_flat = a.as_slice().expect("standard layout");
    let b_flat = b.as_slice().expect("standard layout");
    let nb = b.nrows();

    let row = |i: usize| -> (f64, Vec<f64>) {
        let u = &a_flat[i * d..(i + 1) * d];
        let mut g = if with_grad { vec![0.0; d] } else { Vec::new() };
        let mut s = 0.0;
        for j in 0..nb {
            let v = &b_flat[j * d..(j + 1) * d];
            s += if with_grad {
                kernel.accumulate_grad(u, v, 1.0, &mut g)
            } else {
                kernel.eval(u, v)
            };
        }
        (s, g)
    };

    let per_row: Vec<(f64, Vec<f64>)> = if a.nrows() * nb >= PAR_THRESHOLD {
        (0..a.nrows()).into_par_iter().map(row).collect()
    } else {
        (0..a.nrows()).map(row).collect()
    };

    let mut rows = Vec::with_capacity(per_row.len());
    let mut grads = with_grad.then(|| Array2::zeros((a.nrows(), d)));
    for (i, (s, g)) in per_row.into_iter().enumerate() {
        rows.push(s);
        if let Some(gm) = grads.as_mut() {
            gm.row_mut(i).iter_mut().zip(g).for_each(|(o, x)| *o = x);
        }
    }
    BlockSums { rows, grads }
}

/// Computes the normalized Gram sums of `p` and `q`.
///
/// Self-pairs are included in the within-set sums.
pub fn gram_sums(p: ArrayView2<f64>, q: ArrayView2<f64>, spec: &KernelSpec) -> Result<GramSums> {
    check_pair(p, q)?;
    let kernel = spec.resolve(p, q)?;
    let sums = gram_sums_with(p, q, &kernel);
    if !(sums.pq > 0.0) {
        return Err(Error::Domain(format!(
            "cross Gram sum is not positive ({}); kernel {:?} is degenerate on this input",
            sums.pq,
            kernel.family()
        )));
    }
    Ok(sums)
}

pub(crate) fn gram_sums_with(p: ArrayView2<f64>, q: ArrayView2<f64>, kernel: &Kernel) -> GramSums {
    let n1 = p.nrows() as f64;
    let n2 = q.nrows() as f64;
    GramSums {
        pp: block_sums(p, p, kernel, false).total() / (n1 * n1),
        qq: block_sums(q, q, kernel, false).total() / (n2 * n2),
        pq: block_sums(p, q, kernel, false).total() / (n1 * n2),
    }
}

/// Median heuristic over the pooled samples `p ∪ q`.
pub fn median_heuristic(p: ArrayView2<f64>, q: ArrayView2<f64>) -> Result<f64> {
    if p.ncols() != q.ncols() && p.nrows() > 0 && q.nrows() > 0 {
        return invalid(format!("dimension mismatch: {} vs {}", p.ncols(), q.ncols()));
    }
    let d = if p.nrows() > 0 { p.ncols() } else { q.ncols() };
    let mut pooled = Array2::zeros((p.nrows() + q.nrows(), d));
    for (i, r) in p.rows().into_iter().chain(q.rows()).enumerate() {
        pooled.row_mut(i).assign(&r);
    }
    median_pairwise_distance(pooled.view())
}

/// Median of the pairwise Euclidean distances between distinct rows of `x`
/// (self-pairs excluded). Falls back to 1.0 when the median is zero.
pub fn median_pairwise_distance(x: ArrayView2<f64>) -> Result<f64> {
    let n = x.nrows();
    if n < 2 {
        return invalid(format!("median heuristic needs at least 2 points, got {n}"));
    }
    let x = x.as_standard_layout();
    let d = x.ncols();
    let flat = x.as_slice().expect("standard layout");
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        let u = &flat[i * d..(i + 1) * d];
        for j in (i + 1)..n {
            dists.push(sq_dist(u, &flat[j * d..(j + 1) * d]).sqrt());
        }
    }
    let m = dists.len();
    let cmp = |a: &f64, b: &f64| a.total_cmp(b);
    let (lo, mid, _) = dists.select_nth_unstable_by(m / 2, cmp);
    let mid = *mid;
    let median = if m % 2 == 1 {
        mid
    } else {
        let below = lo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (below + mid)
    };
    if median > 0.0 && median.is_finite() {
        Ok(median)
    } else {
        Ok(1.0)
    }
}
