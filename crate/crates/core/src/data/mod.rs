//! Tabular ingestion, preprocessing, splitting, batching and a synthetic
//! biased-data generator.

mod cache;
mod csv_io;
mod preprocess;
mod split;
mod synthetic;

use std::collections::{BTreeMap, BTreeSet};

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csv_io::{load_csv, load_csv_reader, RawColumn, RawTable};
pub use preprocess::{preprocess, ColumnStats, FitStats};
pub use split::{batches, split, stratified_split_indices};
pub use synthetic::{gen_synthetic, synthetic_table, SyntheticSpec, SYNTHETIC_GENERATOR_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub name: String,
    pub kind: FeatureKind,
}

/// Column roles of a tabular file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub label_column: String,
    /// Label value mapped to 1; every other value maps to 0.
    pub positive_label_value: String,
    pub sensitive_columns: Vec<String>,
    pub feature_columns: Vec<FeatureColumn>,
    /// Per sensitive column, raw value -> group id.
    pub sensitive_value_maps: BTreeMap<String, BTreeMap<String, u32>>,
    /// Append the sensitive columns to the model features.
    #[serde(default)]
    pub include_sensitive_in_features: bool,
    /// Cell values treated as missing (after trimming).
    #[serde(default = "default_missing")]
    pub missing_values: Vec<String>,
}

fn default_missing() -> Vec<String> {
    vec![String::new(), "?".into(), "NA".into()]
}

impl Schema {
    pub fn validate(&self) -> Result<()> {
        let schema_err = |column: &str, message: &str| {
            Err(Error::Schema { column: column.to_string(), message: message.to_string() })
        };
        if self.sensitive_columns.is_empty() {
            return schema_err("", "at least one sensitive column is required");
        }
        let mut seen = BTreeSet::new();
        let names = std::iter::once(&self.label_column)
            .chain(&self.sensitive_columns)
            .chain(self.feature_columns.iter().map(|f| &f.name));
        for name in names {
            if !seen.insert(name.as_str()) {
                return schema_err(name, "column appears in more than one role");
            }
        }
        for col in &self.sensitive_columns {
            match self.sensitive_value_maps.get(col) {
                None => return schema_err(col, "sensitive column has no value map"),
                Some(m) if m.is_empty() => return schema_err(col, "sensitive value map is empty"),
                _ => {}
            }
        }
        Ok(())
    }

    /// Number of groups per sensitive column (`max id + 1`).
    pub fn group_cardinalities(&self) -> Vec<u32> {
        self.sensitive_columns
            .iter()
            .map(|c| self.sensitive_value_maps[c].values().copied().max().unwrap_or(0) + 1)
            .collect()
    }

    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let schema: Schema = serde_json::from_str(&text)?;
        schema.validate()?;
        Ok(schema)
    }
}

/// A preprocessed, immutable dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `N x p` feature matrix.
    pub x: Array2<f64>,
    pub y: Vec<u8>,
    /// `N x K` integer sensitive attributes.
    pub s: Array2<u32>,
    pub feature_names: Vec<String>,
    /// Number of groups per sensitive column.
    pub group_cardinalities: Vec<u32>,
    pub stats: FitStats,
    /// Categorical values seen at transform time but not at fit time.
    pub unseen_categories: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(Axis(0), idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            s: self.s.select(Axis(0), idx),
            feature_names: self.feature_names.clone(),
            group_cardinalities: self.group_cardinalities.clone(),
            stats: self.stats.clone(),
            unseen_categories: self.unseen_categories,
        }
    }

    /// Sensitive column `k` as a vector.
    pub fn sensitive_column(&self, k: usize) -> Vec<u32> {
        self.s.column(k).to_vec()
    }

    /// Cross-product encoding of all sensitive columns, with the group count.
    pub fn joint_groups(&self) -> (Vec<u32>, usize) {
        joint_encode(&self.s, &self.group_cardinalities)
    }

    pub fn write_to<W: std::io::Write>(&self, w: W) -> Result<()> {
        cache::write_dataset(self, w)
    }

    pub fn read_from<R: std::io::Read>(r: R) -> Result<Self> {
        cache::read_dataset(r)
    }
}

/// `g = s₀ + c₀·(s₁ + c₁·(s₂ + ...))` over the sensitive columns.
pub fn joint_encode(s: &Array2<u32>, cardinalities: &[u32]) -> (Vec<u32>, usize) {
    let ids = s
        .rows()
        .into_iter()
        .map(|row| {
            let mut g = 0u32;
            let mut mult = 1u32;
            for (v, c) in row.iter().zip(cardinalities) {
                g += v * mult;
                mult *= c;
            }
            g
        })
        .collect();
    (ids, cardinalities.iter().map(|&c| c as usize).product())
}
