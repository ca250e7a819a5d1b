//! Utility and group-fairness metrics.
//!
//! Group-conditional metrics compare group 0 against group 1 of a single
//! sensitive column. A metric whose required cell is empty (or whose
//! denominator is zero) is reported as `None`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Predictions, labels and a binary group column for one evaluation.
#[derive(Debug, Clone, Copy)]
pub struct EvalInput<'a> {
    pub z: &'a [f64],
    pub y: &'a [u8],
    pub s: &'a [u32],
    pub threshold: f64,
}

impl<'a> EvalInput<'a> {
    pub fn new(z: &'a [f64], y: &'a [u8], s: &'a [u32]) -> Result<Self> {
        Self::with_threshold(z, y, s, DEFAULT_THRESHOLD)
    }

    pub fn with_threshold(z: &'a [f64], y: &'a [u8], s: &'a [u32], threshold: f64) -> Result<Self> {
        if z.len() != y.len() || z.len() != s.len() {
            return invalid(format!(
                "length mismatch: z={}, y={}, s={}",
                z.len(),
                y.len(),
                s.len()
            ));
        }
        if !(threshold > 0.0 && threshold < 1.0) {
            return invalid(format!("threshold must lie in (0, 1), got {threshold}"));
        }
        Ok(EvalInput { z, y, s, threshold })
    }

    fn predicted(&self, i: usize) -> bool {
        self.z[i] >= self.threshold
    }

    /// Mean of `f(i)` over rows matching `filter`; `None` if no row matches.
    fn rate(&self, filter: impl Fn(usize) -> bool, f: impl Fn(usize) -> f64) -> Option<f64> {
        let (mut n, mut sum) = (0usize, 0.0);
        for i in 0..self.z.len() {
            if filter(i) {
                n += 1;
                sum += f(i);
            }
        }
        (n > 0).then(|| sum / n as f64)
    }

    fn positive_rate(&self, group: u32, label: Option<u8>) -> Option<f64> {
        self.rate(
            |i| self.s[i] == group && label.is_none_or(|l| self.y[i] == l),
            |i| self.predicted(i) as u8 as f64,
        )
    }
}

fn gap(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some((a? - b?).abs())
}

/// `|P(Ŷ=1|S=0) - P(Ŷ=1|S=1)|`
pub fn delta_dp(input: &EvalInput) -> Option<f64> {
    gap(input.positive_rate(0, None), input.positive_rate(1, None))
}

/// `|TPR(S=0) - TPR(S=1)|`
pub fn delta_eo(input: &EvalInput) -> Option<f64> {
    gap(input.positive_rate(0, Some(1)), input.positive_rate(1, Some(1)))
}

/// Largest positive-rate gap over `y ∈ {0, 1}`.
pub fn delta_eodd(input: &EvalInput) -> Option<f64> {
    let g0 = gap(input.positive_rate(0, Some(0)), input.positive_rate(1, Some(0)))?;
    let g1 = gap(input.positive_rate(0, Some(1)), input.positive_rate(1, Some(1)))?;
    Some(g0.max(g1))
}

pub fn accuracy(input: &EvalInput) -> Option<f64> {
    input.rate(|_| true, |i| (input.predicted(i) == (input.y[i] == 1)) as u8 as f64)
}

/// Mann-Whitney AUC with half credit for ties.
pub fn auc(input: &EvalInput) -> Option<f64> {
    auc_scores(input.z, input.y)
}

pub fn auc_scores(z: &[f64], y: &[u8]) -> Option<f64> {
    let n_pos = y.iter().filter(|&&v| v == 1).count();
    let n_neg = y.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_by(|&a, &b| z[a].total_cmp(&z[b]));
    // average ranks over tie blocks
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && z[order[j + 1]] == z[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if y[k] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let (np, nn) = (n_pos as f64, n_neg as f64);
    Some((rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn))
}

/// `|P(Y=1|Ŷ=1,S=0) - P(Y=1|Ŷ=1,S=1)|`
pub fn ppv_gap(input: &EvalInput) -> Option<f64> {
    let ppv = |g: u32| {
        input.rate(|i| input.s[i] == g && input.predicted(i), |i| input.y[i] as f64)
    };
    gap(ppv(0), ppv(1))
}

/// `100 · min(r, 1/r)` with `r` the ratio of group positive rates.
pub fn prule(input: &EvalInput) -> Option<f64> {
    let r0 = input.positive_rate(0, None)?;
    let r1 = input.positive_rate(1, None)?;
    if r0 == 0.0 || r1 == 0.0 {
        return None;
    }
    Some(100.0 * (r0 / r1).min(r1 / r0))
}

fn mean_score_gap(input: &EvalInput, label: u8) -> Option<f64> {
    let mean = |g: u32| input.rate(|i| input.s[i] == g && input.y[i] == label, |i| input.z[i]);
    gap(mean(0), mean(1))
}

/// Balance for the positive class: `|E[z|Y=1,S=0] - E[z|Y=1,S=1]|`.
pub fn bfp_gap(input: &EvalInput) -> Option<f64> {
    mean_score_gap(input, 1)
}

/// Balance for the negative class: `|E[z|Y=0,S=0] - E[z|Y=0,S=1]|`.
pub fn bfn_gap(input: &EvalInput) -> Option<f64> {
    mean_score_gap(input, 0)
}

/// Area between the two groups' empirical CDFs of `z` over `[0, 1]`.
pub fn abcc(input: &EvalInput) -> Option<f64> {
    let mut a: Vec<f64> = (0..input.z.len()).filter(|&i| input.s[i] == 0).map(|i| input.z[i]).collect();
    let mut b: Vec<f64> = (0..input.z.len()).filter(|&i| input.s[i] == 1).map(|i| input.z[i]).collect();
    if a.is_empty() || b.is_empty() {
        return None;
    }
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Some(cdf_area_between(&a, &b))
}

/// Exact `∫₀¹ |F_a(t) - F_b(t)| dt` for sorted samples in `[0, 1]`.
fn cdf_area_between(a: &[f64], b: &[f64]) -> f64 {
    let mut breaks: Vec<f64> = a.iter().chain(b).map(|v| v.clamp(0.0, 1.0)).collect();
    breaks.push(0.0);
    breaks.push(1.0);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut area = 0.0;
    for w in breaks.windows(2) {
        let t = w[0];
        while ia < a.len() && a[ia] <= t {
            ia += 1;
        }
        while ib < b.len() && b[ib] <= t {
            ib += 1;
        }
        area += (ia as f64 / na - ib as f64 / nb).abs() * (w[1] - w[0]);
    }
    area
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntersectionalMetrics {
    pub dp_gap_inter: f64,
    pub eo_gap_inter: f64,
    pub worst_group_acc: f64,
}

/// Max-minus-min gaps over `n_groups` joint groups, thresholding with a
/// strict `z > 0.5`. Empty groups contribute a rate of 0.0.
pub fn intersectional_metrics(
    z: &[f64],
    y: &[u8],
    s_joint: &[u32],
    n_groups: usize,
) -> Result<IntersectionalMetrics> {
    if z.is_empty() {
        return invalid("intersectional metrics need at least one sample");
    }
    if z.len() != y.len() || z.len() != s_joint.len() {
        return invalid("length mismatch in intersectional metrics");
    }
    if n_groups < 2 {
        return invalid(format!("need at least 2 groups, got {n_groups}"));
    }
    let pred: Vec<bool> = z.iter().map(|&v| v > 0.5).collect();
    let mean_or_zero = |filter: &dyn Fn(usize) -> bool, f: &dyn Fn(usize) -> f64| {
        let (mut n, mut sum) = (0usize, 0.0);
        for i in 0..z.len() {
            if filter(i) {
                n += 1;
                sum += f(i);
            }
        }
        if n > 0 {
            sum / n as f64
        } else {
            0.0
        }
    };
    let mut rates = Vec::with_capacity(n_groups);
    let mut tprs = Vec::with_capacity(n_groups);
    let mut accs = Vec::with_capacity(n_groups);
    for g in 0..n_groups as u32 {
        rates.push(mean_or_zero(&|i| s_joint[i] == g, &|i| pred[i] as u8 as f64));
        tprs.push(mean_or_zero(&|i| s_joint[i] == g && y[i] == 1, &|i| pred[i] as u8 as f64));
        accs.push(mean_or_zero(&|i| s_joint[i] == g, &|i| (pred[i] == (y[i] == 1)) as u8 as f64));
    }
    let spread = |v: &[f64]| {
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    };
    Ok(IntersectionalMetrics {
        dp_gap_inter: spread(&rates),
        eo_gap_inter: spread(&tprs),
        worst_group_acc: accs.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

/// The full metric suite of one evaluation. `None` marks a missing value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub threshold: f64,
    pub acc: Option<f64>,
    pub auc: Option<f64>,
    pub dp: Option<f64>,
    pub eo: Option<f64>,
    pub eodd: Option<f64>,
    pub ppv_gap: Option<f64>,
    pub prule: Option<f64>,
    pub bfp: Option<f64>,
    pub bfn: Option<f64>,
    pub abcc: Option<f64>,
    pub intersectional: Option<IntersectionalMetrics>,
}

/// Evaluates every metric. Pairwise metrics use the first sensitive column;
/// intersectional metrics use `joint` (group ids and group count) when given.
pub fn evaluate(input: &EvalInput, joint: Option<(&[u32], usize)>) -> Result<MetricsReport> {
    let intersectional = match joint {
        Some((ids, g)) => Some(intersectional_metrics(input.z, input.y, ids, g)?),
        None => None,
    };
    Ok(MetricsReport {
        threshold: input.threshold,
        acc: accuracy(input),
        auc: auc(input),
        dp: delta_dp(input),
        eo: delta_eo(input),
        eodd: delta_eodd(input),
        ppv_gap: ppv_gap(input),
        prule: prule(input),
        bfp: bfp_gap(input),
        bfn: bfn_gap(input),
        abcc: abcc(input),
        intersectional,
    })
}
