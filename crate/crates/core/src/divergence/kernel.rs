use ndarray::{Array2, ArrayView2};

use super::{check_finite, clamp_nonneg, DivergenceResult};
use crate::error::{invalid, Error, Result};
use crate::kernels::{block_sums, check_pair, KernelSpec};

/// Empirical Cauchy-Schwarz divergence
/// `log S_pp + log S_qq - 2 log S_pq` with analytic gradients.
pub fn cs_divergence(
    p: ArrayView2<f64>,
    q: ArrayView2<f64>,
    spec: &KernelSpec,
) -> Result<DivergenceResult> {
    check_pair(p, q)?;
    let kernel = spec.resolve(p, q)?;
    let (n1, n2) = (p.nrows() as f64, q.nrows() as f64);

    let bpp = block_sums(p, p, &kernel, true);
    let bqq = block_sums(q, q, &kernel, true);
    let bpq = block_sums(p, q, &kernel, true);
    let bqp = block_sums(q, p, &kernel, true);

    let spp = bpp.total() / (n1 * n1);
    let sqq = bqq.total() / (n2 * n2);
    let spq = bpq.total() / (n1 * n2);
    check_log_domain(spp, sqq, spq)?;

    let value = check_finite("CS divergence", spp.ln() + sqq.ln() - 2.0 * spq.ln())?;

    let grad_p = bpp.grads.unwrap() * (2.0 / (n1 * n1 * spp))
        - bpq.grads.unwrap() * (2.0 / (n1 * n2 * spq));
    let grad_q = bqq.grads.unwrap() * (2.0 / (n2 * n2 * sqq))
        - bqp.grads.unwrap() * (2.0 / (n1 * n2 * spq));

    Ok(DivergenceResult { value: clamp_nonneg(value), grad_p, grad_q })
}

/// Value-only CS divergence, for large evaluation sets.
pub fn cs_divergence_value(p: ArrayView2<f64>, q: ArrayView2<f64>, spec: &KernelSpec) -> Result<f64> {
    check_pair(p, q)?;
    let kernel = spec.resolve(p, q)?;
    let s = crate::kernels::gram_sums_with(p, q, &kernel);
    check_log_domain(s.pp, s.qq, s.pq)?;
    Ok(clamp_nonneg(check_finite("CS divergence", s.pp.ln() + s.qq.ln() - 2.0 * s.pq.ln())?))
}

fn check_log_domain(spp: f64, sqq: f64, spq: f64) -> Result<()> {
    if spp > 0.0 && sqq > 0.0 && spq > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "log of non-positive Gram sum (S_pp={spp}, S_qq={sqq}, S_pq={spq})"
        )))
    }
}

/// Biased MMD² estimate `S_pp + S_qq - 2 S_pq`.
pub fn mmd_squared(
    p: ArrayView2<f64>,
    q: ArrayView2<f64>,
    spec: &KernelSpec,
) -> Result<DivergenceResult> {
    check_pair(p, q)?;
    let kernel = spec.resolve(p, q)?;
    let (n1, n2) = (p.nrows() as f64, q.nrows() as f64);

    let bpp = block_sums(p, p, &kernel, true);
    let bqq = block_sums(q, q, &kernel, true);
    let bpq = block_sums(p, q, &kernel, true);
    let bqp = block_sums(q, p, &kernel, true);

    let spp = bpp.total() / (n1 * n1);
    let sqq = bqq.total() / (n2 * n2);
    let spq = bpq.total() / (n1 * n2);
    let value = check_finite("MMD", spp + sqq - 2.0 * spq)?;

    let grad_p = bpp.grads.unwrap() * (2.0 / (n1 * n1)) - bpq.grads.unwrap() * (2.0 / (n1 * n2));
    let grad_q = bqq.grads.unwrap() * (2.0 / (n2 * n2)) - bqp.grads.unwrap() * (2.0 / (n1 * n2));

    Ok(DivergenceResult { value: clamp_nonneg(value), grad_p, grad_q })
}

/// Biased HSIC estimate `(1/N²) tr(K H L H)`.
///
/// `x` and `y` are paired row-by-row; each side gets its own kernel.
pub fn hsic(
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    spec_x: &KernelSpec,
    spec_y: &KernelSpec,
) -> Result<DivergenceResult> {
    let n = x.nrows();
    if n != y.nrows() {
        return invalid(format!("HSIC needs paired samples: {} vs {} rows", n, y.nrows()));
    }
    if n < 2 {
        return invalid("HSIC needs at least 2 paired samples");
    }
    if x.ncols() == 0 || y.ncols() == 0 {
        return invalid("sample dimension must be at least 1");
    }
    let kx = spec_x.resolve_single(x)?;
    let ky = spec_y.resolve_single(y)?;
    let x = x.as_standard_layout();
    let y = y.as_standard_layout();

    let gram = |m: &ArrayView2<f64>, k: &crate::kernels::Kernel| {
        let mut g = Array2::zeros((n, n));
        for i in 0..n {
            let u = m.row(i);
            let u = u.as_slice().unwrap();
            for j in 0..n {
                let v = m.row(j);
                g[[i, j]] = k.eval(u, v.as_slice().unwrap());
            }
        }
        g
    };
    let k_mat = gram(&x.view(), &kx);
    let l_mat = gram(&y.view(), &ky);
    let kc = double_center(&k_mat);
    let lc = double_center(&l_mat);

    let nn = (n * n) as f64;
    let value = check_finite("HSIC", (&k_mat * &lc).sum() / nn)?;

    let grad_side = |m: &ArrayView2<f64>, k: &crate::kernels::Kernel, centered_other: &Array2<f64>| {
        let mut g = Array2::zeros(m.raw_dim());
        let mut buf = vec![0.0; m.ncols()];
        for a in 0..n {
            buf.iter_mut().for_each(|b| *b = 0.0);
            let u = m.row(a);
            let u = u.as_slice().unwrap();
            for j in 0..n {
                let v = m.row(j);
                k.accumulate_grad(u, v.as_slice().unwrap(), centered_other[[a, j]], &mut buf);
            }
            for (o, b) in g.row_mut(a).iter_mut().zip(&buf) {
                *o = 2.0 * b / nn;
            }
        }
        g
    };
    let grad_p = grad_side(&x.view(), &kx, &lc);
    let grad_q = grad_side(&y.view(), &ky, &kc);

    Ok(DivergenceResult { value: clamp_nonneg(value), grad_p, grad_q })
}

/// `H M H` with `H = I - (1/N) 1 1ᵀ`.
pub(crate) fn double_center(m: &Array2<f64>) -> Array2<f64> {
    let n = m.nrows() as f64;
    let row_means: Vec<f64> = m.rows().into_iter().map(|r| r.sum() / n).collect();
    let col_means: Vec<f64> = m.columns().into_iter().map(|c| c.sum() / n).collect();
    let grand = row_means.iter().sum::<f64>() / n;
    let mut out = m.clone();
    for ((i, j), v) in out.indexed_iter_mut() {
        *v = *v - row_means[i] - col_means[j] + grand;
    }
    out
}
