use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2, Axis};

use super::{Mode, MultiAttr, Regularizer, Target, TrainConfig};
use crate::divergence::{
    cs_divergence, distance_covariance, hsic, kl_gaussian_moment, mean_disparity, mmd_squared,
    pr_mutual_information, DivergenceResult,
};
use crate::error::{invalid, Result};
use crate::kernels::{KernelFamily, KernelSpec};

/// Fairness term of one mini-batch and its gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct FairnessLoss {
    pub value: f64,
    /// `∂value/∂z` per batch row.
    pub dz: Vec<f64>,
    /// `∂value/∂hidden`, present when the target is the hidden layer.
    pub dhidden: Option<Array2<f64>>,
}

/// Group ids per row, one vector per grouping to penalize.
fn groupings(s: ArrayView2<u32>, multi: MultiAttr) -> Vec<Vec<u32>> {
    match multi {
        MultiAttr::Single => vec![s.column(0).to_vec()],
        MultiAttr::SumPerAttribute => s.columns().into_iter().map(|c| c.to_vec()).collect(),
        MultiAttr::JointGroups => {
            let mut ids: BTreeMap<Vec<u32>, u32> = s.rows().into_iter().map(|r| (r.to_vec(), 0)).collect();
            for (k, v) in ids.values_mut().enumerate() {
                *v = k as u32;
            }
            vec![s.rows().into_iter().map(|r| ids[&r.to_vec()]).collect()]
        }
    }
}

/// Penalty of one group pair, accumulated into `grad` (rows of the batch).
struct PairEval<'a> {
    reg: Regularizer,
    kernel: &'a KernelSpec,
    feats: &'a Array2<f64>,
    groups: &'a [u32],
}

impl PairEval<'_> {
    fn sets(&self, a: u32, b: u32, rows: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let pick = |g: u32| rows.iter().copied().filter(|&i| self.groups[i] == g).collect();
        (pick(a), pick(b))
    }

    fn scatter(grad: &mut Array2<f64>, rows: &[usize], g: &Array2<f64>) {
        for (k, &i) in rows.iter().enumerate() {
            let mut dst = grad.row_mut(i);
            dst += &g.row(k);
        }
    }

    /// Loss between the rows of group `a` and group `b` among `rows`.
    fn loss(&self, a: u32, b: u32, rows: &[usize], grad: &mut Array2<f64>) -> Result<f64> {
        let (ra, rb) = self.sets(a, b, rows);
        if ra.is_empty() || rb.is_empty() {
            return Ok(0.0);
        }
        let two_sample = |f: fn(ArrayView2<f64>, ArrayView2<f64>, &KernelSpec) -> Result<DivergenceResult>| {
            let p = self.feats.select(Axis(0), &ra);
            let q = self.feats.select(Axis(0), &rb);
            f(p.view(), q.view(), self.kernel)
        };
        let r = match self.reg {
            Regularizer::None => return Ok(0.0),
            Regularizer::Cs => two_sample(cs_divergence)?,
            Regularizer::Mmd => two_sample(mmd_squared)?,
            Regularizer::DpGap | Regularizer::EoGap | Regularizer::EoddGap => {
                two_sample(|p, q, _| mean_disparity(p, q))?
            }
            Regularizer::Kl => {
                if ra.len() < 2 || rb.len() < 2 {
                    return Ok(0.0);
                }
                two_sample(|p, q, _| kl_gaussian_moment(p, q))?
            }
            Regularizer::Hsic | Regularizer::Dcov | Regularizer::Pr => {
                let mut joint: Vec<usize> = ra.iter().chain(&rb).copied().collect();
                joint.sort_unstable();
                let ind: Vec<u32> = joint.iter().map(|&i| (self.groups[i] == b) as u32).collect();
                let x = self.feats.select(Axis(0), &joint);
                let yv = Array2::from_shape_fn((joint.len(), 1), |(i, _)| ind[i] as f64);
                let r = match self.reg {
                    Regularizer::Hsic => {
                        hsic(x.view(), yv.view(), self.kernel, &KernelSpec::median(KernelFamily::GaussianRbf))?
                    }
                    Regularizer::Dcov => distance_covariance(x.view(), yv.view())?,
                    _ => pr_mutual_information(&x.column(0).to_vec(), &ind)?,
                };
                Self::scatter(grad, &joint, &r.grad_p);
                return Ok(r.value);
            }
        };
        Self::scatter(grad, &ra, &r.grad_p);
        Self::scatter(grad, &rb, &r.grad_q);
        Ok(r.value)
    }
}

/// Fairness penalty of a mini-batch and its gradients with respect to the
/// predictions and (for the hidden target) the last hidden activations.
///
/// Groups are compared pairwise; a comparison with an empty side contributes
/// nothing, as does a batch containing a single group.
pub fn fairness_batch_loss(
    config: &TrainConfig,
    z: &[f64],
    hidden: ArrayView2<f64>,
    y: &[u8],
    s: ArrayView2<u32>,
) -> Result<FairnessLoss> {
    let b = z.len();
    if b == 0 {
        return invalid("fairness loss needs a non-empty batch");
    }
    if y.len() != b || s.nrows() != b {
        return invalid(format!("batch size mismatch: z {b}, y {}, s {}", y.len(), s.nrows()));
    }
    if s.ncols() == 0 {
        return invalid("at least one sensitive column is required");
    }
    config.check_combination()?;
    let feats = match config.target {
        Target::Prediction => Array2::from_shape_fn((b, 1), |(i, _)| z[i]),
        Target::Hidden => {
            if hidden.nrows() != b || hidden.ncols() == 0 {
                return invalid(format!("hidden activations have shape {:?}, expected {b} rows", hidden.dim()));
            }
            hidden.to_owned()
        }
    };
    let conditions: &[Option<u8>] = match config.mode {
        Mode::Dp => &[None],
        Mode::Eo => &[Some(1)],
        Mode::Eodd => &[Some(0), Some(1)],
    };
    let cond_rows: Vec<Vec<usize>> = conditions
        .iter()
        .map(|c| (0..b).filter(|&i| c.is_none_or(|v| y[i] == v)).collect())
        .collect();

    let mut value = 0.0;
    let mut grad = Array2::zeros(feats.dim());
    if config.regularizer != Regularizer::None {
        for groups in groupings(s, config.multi_attr) {
            let mut present: Vec<u32> = groups.clone();
            present.sort_unstable();
            present.dedup();
            let eval = PairEval { reg: config.regularizer, kernel: &config.kernel, feats: &feats, groups: &groups };
            // worst pair; a single binary grouping has exactly one pair
            let mut best: Option<(f64, Array2<f64>)> = None;
            for (ia, &ga) in present.iter().enumerate() {
                for &gb in &present[ia + 1..] {
                    let mut g = Array2::zeros(feats.dim());
                    let mut v = 0.0;
                    for rows in &cond_rows {
                        v += eval.loss(ga, gb, rows, &mut g)?;
                    }
                    if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                        best = Some((v, g));
                    }
                }
            }
            if let Some((v, g)) = best {
                value += v;
                grad += &g;
            }
        }
    }
    Ok(match config.target {
        Target::Prediction => FairnessLoss { value, dz: grad.column(0).to_vec(), dhidden: None },
        Target::Hidden => FairnessLoss { value, dz: vec![0.0; b], dhidden: Some(grad) },
    })
}
