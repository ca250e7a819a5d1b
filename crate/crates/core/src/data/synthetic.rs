use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{preprocess, ColumnStats, Dataset, FeatureColumn, FeatureKind, FitStats, RawColumn, RawTable, Schema};
use crate::error::{invalid, Result};

/// Bumped whenever the sampling procedure changes.
pub const SYNTHETIC_GENERATOR_VERSION: u32 = 1;

/// Label signal on the first feature.
const LABEL_SHIFT: f64 = 1.0;
/// Label signal on every other feature.
const WEAK_SHIFT: f64 = 0.35;
/// Group shift on the first feature per unit of bias.
const GROUP_SHIFT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// Rows per (group, label) cell.
    pub n_per_cell: usize,
    /// Strength of the group/feature association; 0 means none.
    pub bias: f64,
    pub dim: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_per_cell == 0 {
            return invalid("synthetic cell size must be at least 1");
        }
        if self.dim < 2 {
            return invalid(format!("synthetic dimension must be at least 2, got {}", self.dim));
        }
        if !(0.0..=1.0).contains(&self.bias) {
            return invalid(format!("bias must lie in [0, 1], got {}", self.bias));
        }
        Ok(())
    }

    pub fn schema(&self) -> Schema {
        let map: BTreeMap<String, u32> = [("0".to_string(), 0), ("1".to_string(), 1)].into();
        Schema {
            label_column: "label".into(),
            positive_label_value: "1".into(),
            sensitive_columns: vec!["group".into()],
            feature_columns: (0..self.dim)
                .map(|j| FeatureColumn { name: format!("x{j}"), kind: FeatureKind::Numeric })
                .collect(),
            sensitive_value_maps: [("group".to_string(), map)].into(),
            include_sensitive_in_features: false,
            missing_values: vec![String::new()],
        }
    }
}

/// Four equal (group, label) cells with Gaussian features.
///
/// The first feature carries both the label and, scaled by `bias`, the
/// group; the remaining features carry a weaker label signal only. Labels are
/// independent of the group, so any demographic-parity gap a classifier shows
/// comes from its use of the group-correlated feature.
pub fn synthetic_table(spec: &SyntheticSpec) -> Result<(RawTable, Schema)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = 4 * spec.n_per_cell;
    let mut cols = vec![Vec::with_capacity(n); spec.dim];
    let mut labels = Vec::with_capacity(n);
    let mut sensitive = Vec::with_capacity(n);
    for s in 0..2u32 {
        for y in 0..2u8 {
            let ys = 2.0 * y as f64 - 1.0;
            let ss = 2.0 * s as f64 - 1.0;
            for _ in 0..spec.n_per_cell {
                for (j, col) in cols.iter_mut().enumerate() {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    let mean = if j == 0 {
                        ys * LABEL_SHIFT + spec.bias * GROUP_SHIFT * ss
                    } else {
                        ys * WEAK_SHIFT
                    };
                    col.push(mean + noise);
                }
                labels.push(y);
                sensitive.push(vec![s]);
            }
        }
    }
    let table = RawTable {
        features: cols.into_iter().map(RawColumn::Numeric).collect(),
        labels,
        sensitive,
        dropped_missing: 0,
        dropped_unknown_sensitive: 0,
    };
    Ok((table, spec.schema()))
}

/// Synthetic dataset with untransformed features.
pub fn gen_synthetic(n_per_cell: usize, bias: f64, dim: usize, seed: u64) -> Result<Dataset> {
    let spec = SyntheticSpec { n_per_cell, bias, dim, seed };
    let (table, schema) = synthetic_table(&spec)?;
    let identity = FitStats {
        columns: (0..dim)
            .map(|j| ColumnStats::Numeric { name: format!("x{j}"), mean: 0.0, std: 1.0 })
            .collect(),
    };
    preprocess(&table, &schema, Some(&identity))
}
