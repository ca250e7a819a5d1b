//! Objective assembly, gradient injection and training-loop contracts.

mod common;

use common::{normal_matrix, rng, worst_relative_error, FD_STEP};
use csfair::data::{gen_synthetic, split, Dataset, FitStats};
use csfair::kernels::KernelSpec;
use csfair::model::MlpParams;
use csfair::trainer::{
    batch_objective, sweep, train, L2Reduction, Mode, MultiAttr, Regularizer, Target, TrainConfig,
};
use ndarray::{array, Array2};
use rand::Rng;

fn toy_batch() -> (Array2<f64>, Vec<u8>, Array2<u32>) {
    let mut g = rng(31);
    let x = normal_matrix(&mut g, 6, 3, 0.0);
    let y = vec![1, 0, 1, 1, 0, 0];
    let s = array![[0u32], [0], [0], [1], [1], [1]];
    (x, y, s)
}

fn mode_for(reg: Regularizer) -> Mode {
    match reg {
        Regularizer::EoGap => Mode::Eo,
        Regularizer::EoddGap => Mode::Eodd,
        _ => Mode::Dp,
    }
}

/// Finite-difference check of the assembled objective over every parameter.
fn check_objective(config: &TrainConfig) {
    let (x, y, s) = toy_batch();
    let params = MlpParams::init(&config.hidden, 3, 5).unwrap();
    let total = |p: &MlpParams| {
        batch_objective(config, p, x.view(), &y, s.view(), 0).unwrap().total(config.alpha)
    };
    let analytic = batch_objective(config, &params, x.view(), &y, s.view(), 0).unwrap().grads.flat();
    let base = params.flat();
    let mut numeric = Vec::with_capacity(base.len());
    let mut probe = params.clone();
    for k in 0..base.len() {
        let mut v = base.clone();
        v[k] += FD_STEP;
        probe.set_flat(&v);
        let up = total(&probe);
        v[k] -= 2.0 * FD_STEP;
        probe.set_flat(&v);
        let down = total(&probe);
        numeric.push((up - down) / (2.0 * FD_STEP));
    }
    let err = worst_relative_error(&analytic, &numeric, 1e-10);
    assert!(
        err < 1e-4,
        "{:?}/{:?}/{:?}: rel err {err:e}",
        config.regularizer,
        config.mode,
        config.target
    );
}

fn toy_config(reg: Regularizer, target: Target) -> TrainConfig {
    TrainConfig {
        alpha: 0.7,
        beta: 0.3,
        mode: mode_for(reg),
        target,
        hidden: vec![4],
        kernel: KernelSpec::gaussian(1.0),
        ..TrainConfig::with_regularizer(reg)
    }
}

#[test]
fn objective_gradient_on_predictions() {
    for reg in Regularizer::ALL {
        for l2 in [L2Reduction::Mean, L2Reduction::Sum] {
            check_objective(&TrainConfig { l2_reduction: l2, ..toy_config(reg, Target::Prediction) });
        }
    }
}

#[test]
fn objective_gradient_on_hidden_layer() {
    for reg in Regularizer::ALL.into_iter().filter(|r| !r.scalar_only() && *r != Regularizer::None) {
        check_objective(&toy_config(reg, Target::Hidden));
        check_objective(&TrainConfig { hidden: vec![4, 3], ..toy_config(reg, Target::Hidden) });
    }
}

#[test]
fn objective_gradient_for_conditional_modes() {
    for reg in [Regularizer::Cs, Regularizer::Mmd, Regularizer::DpGap] {
        for mode in [Mode::Eo, Mode::Eodd] {
            check_objective(&TrainConfig { mode, ..toy_config(reg, Target::Prediction) });
        }
    }
}

#[test]
fn missing_group_contributes_erm_gradient() {
    let (x, y, _) = toy_batch();
    let one_group = Array2::<u32>::zeros((6, 1));
    let params = MlpParams::init(&[4], 3, 9).unwrap();
    let erm = TrainConfig { beta: 0.2, hidden: vec![4], ..TrainConfig::default() };
    let base = batch_objective(&erm, &params, x.view(), &y, one_group.view(), 0).unwrap();
    for reg in Regularizer::ALL {
        let config = TrainConfig { regularizer: reg, alpha: 5.0, mode: mode_for(reg), ..erm.clone() };
        let with = batch_objective(&config, &params, x.view(), &y, one_group.view(), 0).unwrap();
        assert_eq!(with.fair, 0.0);
        assert_eq!(with.grads.flat(), base.grads.flat(), "{reg:?}");
    }
}

fn dataset(x: Array2<f64>, y: Vec<u8>, s: Vec<u32>) -> Dataset {
    let n = y.len();
    let p = x.ncols();
    Dataset {
        x,
        y,
        s: Array2::from_shape_vec((n, 1), s).unwrap(),
        feature_names: (0..p).map(|j| format!("x{j}")).collect(),
        group_cardinalities: vec![2],
        stats: FitStats::default(),
        unseen_categories: 0,
    }
}

/// 200 points labelled by the sign of `x0 + x1`, with a margin.
fn separable() -> Dataset {
    let mut g = rng(77);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    let mut s = Vec::new();
    while y.len() < 200 {
        let a: f64 = g.random_range(-2.0..2.0);
        let b: f64 = g.random_range(-2.0..2.0);
        if (a + b).abs() < 0.3 {
            continue;
        }
        rows.extend([a, b]);
        y.push(u8::from(a + b > 0.0));
        s.push(g.random_range(0..2));
    }
    dataset(Array2::from_shape_vec((200, 2), rows).unwrap(), y, s)
}

#[test]
fn erm_fits_separable_data() {
    let data = separable();
    let config = TrainConfig { hidden: vec![16], batch_size: 64, ..TrainConfig::default() };
    let run = train(&config, &data, &data).unwrap();
    let last = run.history.last().unwrap();
    assert!(last.bce < 0.1, "final BCE {}", last.bce);
    assert_eq!(run.epochs_run(), 150);
}

#[test]
fn history_terms_add_up_and_schedule_is_exact() {
    let data = separable();
    let config = TrainConfig {
        alpha: 0.4,
        beta: 0.5,
        hidden: vec![8],
        batch_size: 50,
        epochs: 40,
        step_size: 7,
        gamma: 0.5,
        lr_floor: 1e-3,
        ..TrainConfig::with_regularizer(Regularizer::Cs)
    };
    let run = train(&config, &data, &data).unwrap();
    for rec in &run.history {
        assert!((rec.total - (rec.bce + config.alpha * rec.fair + rec.l2)).abs() <= 1e-10);
        let expected = config.lr * config.gamma.powi((rec.epoch / config.step_size) as i32);
        assert_eq!(rec.lr, expected, "epoch {}", rec.epoch);
    }
    // 1e-2·0.5^k < 1e-3 first at k = 4, i.e. epoch 28.
    assert_eq!(run.epochs_run(), 28);
}

#[test]
fn default_schedule_runs_all_epochs() {
    let data = separable();
    let config = TrainConfig { hidden: vec![4], batch_size: 200, ..TrainConfig::default() };
    let run = train(&config, &data, &data).unwrap();
    assert_eq!(run.epochs_run(), 150);
    assert_eq!(run.history[149].lr, 1e-2 * 0.1f64.powi(2));
}

#[test]
fn training_is_deterministic() {
    let data = gen_synthetic(60, 0.8, 4, 3).unwrap();
    let (tr, te) = split(&data, 0.2, 0).unwrap();
    let config = TrainConfig { alpha: 0.5, epochs: 20, hidden: vec![8], batch_size: 64, ..TrainConfig::with_regularizer(Regularizer::Cs) };
    let a = train(&config, &tr, &te).unwrap();
    let b = train(&config, &tr, &te).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.history, b.history);
    assert_eq!(a.model, b.model);
    let c = train(&TrainConfig { seed: 1, ..config }, &tr, &te).unwrap();
    assert_ne!(a.model, c.model);
}

#[test]
fn sweep_cells_match_direct_runs() {
    let data = gen_synthetic(50, 0.8, 4, 4).unwrap();
    let (tr, te) = split(&data, 0.2, 0).unwrap();
    let base = TrainConfig { epochs: 15, hidden: vec![8], batch_size: 64, ..TrainConfig::with_regularizer(Regularizer::Cs) };

    let single = sweep(&base, &[0.3], &[0.1], &[2], &tr, &te, 1).unwrap();
    let direct = train(&TrainConfig { alpha: 0.3, beta: 0.1, seed: 2, ..base.clone() }, &tr, &te).unwrap();
    let cell = single[0].outcome.as_ref().unwrap();
    assert_eq!(cell.metrics, direct.metrics);
    assert_eq!(cell.model, direct.model);

    let alphas = [0.0, 0.5];
    let betas = [0.0, 1.0];
    let seeds = [0, 1];
    let seq = sweep(&base, &alphas, &betas, &seeds, &tr, &te, 1).unwrap();
    let par = sweep(&base, &alphas, &betas, &seeds, &tr, &te, 4).unwrap();
    assert_eq!(seq.len(), 8);
    for (a, b) in seq.iter().zip(&par) {
        assert_eq!((a.alpha, a.beta, a.seed), (b.alpha, b.beta, b.seed));
        assert_eq!(a.outcome.as_ref().unwrap().metrics, b.outcome.as_ref().unwrap().metrics);
    }
    assert!(sweep(&base, &[], &betas, &seeds, &tr, &te, 1).is_err());
}

#[test]
fn failed_cells_do_not_abort_the_sweep() {
    let data = gen_synthetic(30, 0.5, 3, 5).unwrap();
    let (tr, te) = split(&data, 0.2, 0).unwrap();
    let base = TrainConfig { epochs: 3, hidden: vec![4], ..TrainConfig::default() };
    let cells = sweep(&base, &[0.1, -1.0], &[0.0], &[0], &tr, &te, 2).unwrap();
    assert!(cells[0].is_ok());
    assert!(!cells[1].is_ok());
}

#[test]
fn multi_attribute_modes_train() {
    let mut g = rng(12);
    let n = 120;
    let x = normal_matrix(&mut g, n, 3, 0.0);
    let y: Vec<u8> = (0..n).map(|i| u8::from(x[[i, 0]] > 0.0)).collect();
    let s = Array2::from_shape_fn((n, 2), |(i, k)| ((i >> k) & 1) as u32);
    let mut data = dataset(x, y, vec![0; n]);
    data.s = s;
    data.group_cardinalities = vec![2, 2];
    for multi in [MultiAttr::SumPerAttribute, MultiAttr::JointGroups] {
        let config = TrainConfig { alpha: 1.0, epochs: 5, hidden: vec![6], multi_attr: multi, ..TrainConfig::with_regularizer(Regularizer::Cs) };
        let run = train(&config, &data, &data).unwrap();
        assert!(run.metrics.intersectional.is_some());
        assert!(run.history.iter().all(|r| r.fair.is_finite()));
    }
}

#[test]
fn synthetic_bias_controls_erm_disparity() {
    let erm = TrainConfig { hidden: vec![32, 16], beta: 1.0, ..TrainConfig::default() };
    let mean_dp = |n: usize, bias: f64| {
        let data = gen_synthetic(n, bias, 6, 12345).unwrap();
        let (tr, te) = split(&data, 0.2, 0).unwrap();
        (0..3)
            .map(|seed| train(&TrainConfig { seed, ..erm.clone() }, &tr, &te).unwrap().metrics.dp.unwrap())
            .sum::<f64>()
            / 3.0
    };
    let fair = mean_dp(4000, 0.0);
    assert!(fair < 0.05, "bias 0: {fair}");
    let biased = mean_dp(500, 0.8);
    assert!(biased > 0.15, "bias 0.8: {biased}");
}
