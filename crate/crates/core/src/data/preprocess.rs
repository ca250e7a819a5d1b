use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Dataset, RawColumn, RawTable, Schema};
use crate::error::{invalid, Result};

/// Floor applied to fitted standard deviations.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnStats {
    Numeric { name: String, mean: f64, std: f64 },
    /// Categories in first-appearance order of the fitting split.
    Categorical { name: String, categories: Vec<String> },
}

/// Transform parameters fitted on the training split.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitStats {
    pub columns: Vec<ColumnStats>,
}

impl FitStats {
    fn width(&self) -> usize {
        self.columns
            .iter()
            .map(|c| match c {
                ColumnStats::Numeric { .. } => 1,
                ColumnStats::Categorical { categories, .. } => categories.len(),
            })
            .sum()
    }
}

fn fit_numeric(name: &str, v: &[f64]) -> ColumnStats {
    let n = v.len().max(1) as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    ColumnStats::Numeric { name: name.to_string(), mean, std: var.sqrt().max(STD_FLOOR) }
}

fn fit_categorical(name: &str, v: &[String]) -> ColumnStats {
    let mut categories: Vec<String> = Vec::new();
    for s in v {
        if !categories.contains(s) {
            categories.push(s.clone());
        }
    }
    ColumnStats::Categorical { name: name.to_string(), categories }
}

/// Columns in feature order: schema features, then (optionally) the
/// sensitive columns as numerics.
fn feature_columns(raw: &RawTable, schema: &Schema) -> Vec<(String, RawColumn)> {
    let mut cols: Vec<(String, RawColumn)> = schema
        .feature_columns
        .iter()
        .zip(&raw.features)
        .map(|(c, r)| (c.name.clone(), r.clone()))
        .collect();
    if schema.include_sensitive_in_features {
        for (k, name) in schema.sensitive_columns.iter().enumerate() {
            let v = raw.sensitive.iter().map(|row| row[k] as f64).collect();
            cols.push((name.clone(), RawColumn::Numeric(v)));
        }
    }
    cols
}

/// One-hot encodes categoricals and z-scores numerics.
///
/// Without `fit_stats` the statistics are fitted on `raw` itself. Categories
/// unseen at fit time encode as an all-zero block and are counted.
pub fn preprocess(raw: &RawTable, schema: &Schema, fit_stats: Option<&FitStats>) -> Result<Dataset> {
    schema.validate()?;
    if !raw.check_consistent() || raw.features.len() != schema.feature_columns.len() {
        return invalid("raw table does not conform to the schema");
    }
    let cols = feature_columns(raw, schema);
    let stats = match fit_stats {
        Some(s) => {
            if s.columns.len() != cols.len() {
                return invalid("fit statistics do not match the schema's columns");
            }
            s.clone()
        }
        None => FitStats {
            columns: cols
                .iter()
                .map(|(name, c)| match c {
                    RawColumn::Numeric(v) => fit_numeric(name, v),
                    RawColumn::Categorical(v) => fit_categorical(name, v),
                })
                .collect(),
        },
    };

    let n = raw.len();
    let mut x = Array2::zeros((n, stats.width()));
    let mut names = Vec::with_capacity(stats.width());
    let mut unseen = 0;
    let mut offset = 0;
    for ((_, col), st) in cols.iter().zip(&stats.columns) {
        match (col, st) {
            (RawColumn::Numeric(v), ColumnStats::Numeric { name, mean, std }) => {
                for (i, val) in v.iter().enumerate() {
                    x[[i, offset]] = (val - mean) / std;
                }
                names.push(name.clone());
                offset += 1;
            }
            (RawColumn::Categorical(v), ColumnStats::Categorical { name, categories }) => {
                for (i, val) in v.iter().enumerate() {
                    match categories.iter().position(|c| c == val) {
                        Some(k) => x[[i, offset + k]] = 1.0,
                        None => unseen += 1,
                    }
                }
                names.extend(categories.iter().map(|c| format!("{name}={c}")));
                offset += categories.len();
            }
            _ => return invalid("fit statistics column kinds do not match the schema"),
        }
    }

    let k = schema.sensitive_columns.len();
    let s = Array2::from_shape_fn((n, k), |(i, j)| raw.sensitive[i][j]);
    Ok(Dataset {
        x,
        y: raw.labels.clone(),
        s,
        feature_names: names,
        group_cardinalities: schema.group_cardinalities(),
        stats,
        unseen_categories: unseen,
    })
}
