use rayon::prelude::*;

use super::{train, RunResult, TrainConfig};
use crate::data::Dataset;
use crate::error::{invalid, Result};

/// One grid cell; a failed run keeps its error message.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub outcome: std::result::Result<RunResult, String>,
}

impl SweepCell {
    pub fn is_ok(&self) -> bool {
        self.outcome.is_ok()
    }
}

/// Trains every `(alpha, beta, seed)` cell, alpha-major, on up to `jobs`
/// threads. Results do not depend on `jobs`.
pub fn sweep(
    base: &TrainConfig,
    alphas: &[f64],
    betas: &[f64],
    seeds: &[u64],
    train_set: &Dataset,
    test_set: &Dataset,
    jobs: usize,
) -> Result<Vec<SweepCell>> {
    if alphas.is_empty() || betas.is_empty() || seeds.is_empty() {
        return invalid("sweep grids must be non-empty");
    }
    if jobs == 0 {
        return invalid("jobs must be at least 1");
    }
    let grid: Vec<(f64, f64, u64)> = alphas
        .iter()
        .flat_map(|&a| betas.iter().flat_map(move |&b| seeds.iter().map(move |&s| (a, b, s))))
        .collect();
    let run = |&(alpha, beta, seed): &(f64, f64, u64)| {
        let config = TrainConfig { alpha, beta, seed, ..base.clone() };
        let outcome = train(&config, train_set, test_set).map_err(|e| e.to_string());
        SweepCell { alpha, beta, seed, outcome }
    };
    if jobs == 1 {
        return Ok(grid.iter().map(run).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| crate::Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| grid.par_iter().map(run).collect()))
}
