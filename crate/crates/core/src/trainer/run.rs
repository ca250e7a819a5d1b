use std::time::Instant;

use ndarray::{ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{fairness_batch_loss, L2Reduction, Target, TrainConfig};
use crate::data::{batches, joint_encode, Dataset};
use crate::error::{invalid, Error, Result};
use crate::metrics::{evaluate, EvalInput, MetricsReport};
use crate::model::{bce_loss, MlpParams};
use crate::optim::{step_decay_lr, Adam};

/// Batch-averaged loss terms of one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub bce: f64,
    /// Unweighted fairness loss.
    pub fair: f64,
    pub l2: f64,
    /// `bce + alpha * fair + l2`.
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub config: TrainConfig,
    pub history: Vec<EpochRecord>,
    pub metrics: MetricsReport,
    pub seconds: f64,
    pub model: MlpParams,
}

impl RunResult {
    pub fn epochs_run(&self) -> usize {
        self.history.len()
    }
}

fn finite(term: &str, epoch: usize, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { term: term.to_string(), epoch })
    }
}

/// Full metric suite of `params` on `data`. Intersectional metrics are
/// included whenever there are more than two joint groups.
pub fn evaluate_model(params: &MlpParams, data: &Dataset, threshold: f64) -> Result<MetricsReport> {
    if data.is_empty() {
        return invalid("cannot evaluate on an empty dataset");
    }
    let z = params.predict(data.x.view())?;
    let s0 = data.sensitive_column(0);
    let input = EvalInput::with_threshold(&z, &data.y, &s0, threshold)?;
    let (ids, g) = joint_encode(&data.s, &data.group_cardinalities);
    let joint = (g > 2).then_some((ids.as_slice(), g));
    evaluate(&input, joint)
}

/// Loss terms of one batch and the gradient of their weighted total.
#[derive(Debug, Clone)]
pub struct BatchObjective {
    pub bce: f64,
    /// Unweighted fairness loss.
    pub fair: f64,
    pub l2: f64,
    /// Gradient of `bce + alpha * fair + l2` with respect to every parameter.
    pub grads: MlpParams,
}

impl BatchObjective {
    pub fn total(&self, alpha: f64) -> f64 {
        self.bce + alpha * self.fair + self.l2
    }
}

/// Objective `BCE + α·fair + (β/2)‖W‖²` on one batch, with its gradient.
///
/// `epoch` only labels non-finite diagnostics.
pub fn batch_objective(
    config: &TrainConfig,
    params: &MlpParams,
    x: ArrayView2<f64>,
    y: &[u8],
    s: ArrayView2<u32>,
    epoch: usize,
) -> Result<BatchObjective> {
    let cache = params.forward(x)?;
    let (bce, mut dz) = bce_loss(&cache.probs, y)?;
    finite("bce", epoch, bce)?;
    let fl = fairness_batch_loss(config, &cache.probs, cache.hidden().view(), y, s)?;
    let fair = finite("fairness", epoch, fl.value)?;
    for (d, f) in dz.iter_mut().zip(&fl.dz) {
        *d += config.alpha * f;
    }
    let dhidden = fl.dhidden.map(|h| h * config.alpha);
    let mut grads = params.backward(&cache, &dz, dhidden.as_ref().map(|h| h.view()))?;
    let beta = match config.l2_reduction {
        L2Reduction::Mean => config.beta / params.num_weights() as f64,
        L2Reduction::Sum => config.beta,
    };
    let (l2, l2_grads) = params.l2_penalty(beta)?;
    finite("l2", epoch, l2)?;
    grads.add_scaled(&l2_grads, 1.0);
    if !grads.all_finite() {
        return Err(Error::NonFinite { term: "gradient".into(), epoch });
    }
    Ok(BatchObjective { bce, fair, l2, grads })
}

/// Trains an MLP with mini-batch Adam and evaluates it on `test_set`.
pub fn train(config: &TrainConfig, train_set: &Dataset, test_set: &Dataset) -> Result<RunResult> {
    config.validate()?;
    if train_set.is_empty() {
        return invalid("training set is empty");
    }
    if train_set.n_features() != test_set.n_features() {
        return invalid(format!(
            "train and test feature counts differ: {} vs {}",
            train_set.n_features(),
            test_set.n_features()
        ));
    }
    if config.target == Target::Hidden && config.hidden.is_empty() {
        return invalid("target hidden requires at least one hidden layer");
    }
    let start = Instant::now();
    let mut params = MlpParams::init(&config.hidden, train_set.n_features(), config.seed)?;
    let mut adam = Adam::new(&params);
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let lr = step_decay_lr(config.lr, config.gamma, config.step_size, epoch);
        if lr < config.lr_floor {
            break;
        }
        let plan = batches(train_set.len(), config.batch_size, config.seed, epoch)?;
        let mut sums = [0.0; 3];
        for idx in &plan {
            let x = train_set.x.select(Axis(0), idx);
            let y: Vec<u8> = idx.iter().map(|&i| train_set.y[i]).collect();
            let s = train_set.s.select(Axis(0), idx);
            let step = batch_objective(config, &params, x.view(), &y, s.view(), epoch)?;
            adam.step(&mut params, &step.grads, lr);
            if !params.all_finite() {
                return Err(Error::NonFinite { term: "parameters".into(), epoch });
            }
            sums[0] += step.bce;
            sums[1] += step.fair;
            sums[2] += step.l2;
        }
        let nb = plan.len() as f64;
        let (bce, fair, l2) = (sums[0] / nb, sums[1] / nb, sums[2] / nb);
        let total = finite("total", epoch, bce + config.alpha * fair + l2)?;
        history.push(EpochRecord { epoch, lr, bce, fair, l2, total });
    }

    let metrics = evaluate_model(&params, test_set, config.threshold)?;
    Ok(RunResult {
        config: config.clone(),
        history,
        metrics,
        seconds: start.elapsed().as_secs_f64(),
        model: params,
    })
}
