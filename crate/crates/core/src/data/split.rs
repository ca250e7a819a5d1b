use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{invalid, Result};

/// Label-stratified random split into (train, test) index lists, each sorted.
///
/// The test size is `round(N · test_fraction)`, shared across classes by
/// largest remainder.
pub fn stratified_split_indices(labels: &[u8], test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = labels.len();
    if n < 2 {
        return invalid(format!("need at least 2 samples to split, got {n}"));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return invalid(format!("test fraction must lie in (0, 1), got {test_fraction}"));
    }
    let mut classes: Vec<Vec<usize>> = vec![Vec::new(), Vec::new()];
    for (i, &y) in labels.iter().enumerate() {
        classes[(y != 0) as usize].push(i);
    }
    for (c, members) in classes.iter().enumerate() {
        if members.len() == 1 {
            return invalid(format!("label class {c} has fewer than 2 samples; cannot stratify"));
        }
    }
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let quotas: Vec<f64> = classes.iter().map(|m| m.len() as f64 * n_test as f64 / n as f64).collect();
    let mut alloc: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..classes.len()).collect();
    order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())));
    let mut left = n_test - alloc.iter().sum::<usize>();
    for c in order {
        if left == 0 {
            break;
        }
        if alloc[c] < classes[c].len() {
            alloc[c] += 1;
            left -= 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (members, &k) in classes.iter_mut().zip(&alloc) {
        members.shuffle(&mut rng);
        test.extend_from_slice(&members[..k]);
        train.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split(dataset: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (tr, te) = stratified_split_indices(&dataset.y, test_fraction, seed)?;
    Ok((dataset.select(&tr), dataset.select(&te)))
}

/// Shuffled mini-batches for one epoch; the final partial batch is kept.
pub fn batches(n_samples: usize, batch_size: usize, seed: u64, epoch: usize) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return invalid("batch size must be at least 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    let mut idx: Vec<usize> = (0..n_samples).collect();
    idx.shuffle(&mut rng);
    Ok(idx.chunks(batch_size).map(|c| c.to_vec()).collect())
}
