use std::io::Read;
use std::path::Path;

use super::{FeatureKind, Schema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum RawColumn {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl RawColumn {
    fn len(&self) -> usize {
        match self {
            RawColumn::Numeric(v) => v.len(),
            RawColumn::Categorical(v) => v.len(),
        }
    }

    fn select(&self, idx: &[usize]) -> RawColumn {
        match self {
            RawColumn::Numeric(v) => RawColumn::Numeric(idx.iter().map(|&i| v[i]).collect()),
            RawColumn::Categorical(v) => {
                RawColumn::Categorical(idx.iter().map(|&i| v[i].clone()).collect())
            }
        }
    }
}

/// Parsed rows restricted to the schema's columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    /// One entry per schema feature column, in schema order.
    pub features: Vec<RawColumn>,
    pub labels: Vec<u8>,
    /// Row-major sensitive ids, one inner vector per row.
    pub sensitive: Vec<Vec<u32>>,
    pub dropped_missing: usize,
    pub dropped_unknown_sensitive: usize,
}

impl RawTable {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dropped_count(&self) -> usize {
        self.dropped_missing + self.dropped_unknown_sensitive
    }

    pub fn select(&self, idx: &[usize]) -> RawTable {
        RawTable {
            features: self.features.iter().map(|c| c.select(idx)).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            sensitive: idx.iter().map(|&i| self.sensitive[i].clone()).collect(),
            dropped_missing: self.dropped_missing,
            dropped_unknown_sensitive: self.dropped_unknown_sensitive,
        }
    }

    pub(crate) fn check_consistent(&self) -> bool {
        self.features.iter().all(|c| c.len() == self.labels.len())
            && self.sensitive.len() == self.labels.len()
    }
}

pub fn load_csv(path: &Path, schema: &Schema) -> Result<RawTable> {
    let file = std::fs::File::open(path)?;
    load_csv_reader(file, schema)
}

/// Reads a headered, comma-separated table.
///
/// Rows with a missing value in any used column, or with a sensitive value
/// absent from its value map, are dropped and counted.
pub fn load_csv_reader<R: Read>(reader: R, schema: &Schema) -> Result<RawTable> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Schema {
            column: name.to_string(),
            message: "column not found in header".into(),
        })
    };
    let label_idx = find(&schema.label_column)?;
    let sens_idx = schema
        .sensitive_columns
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;
    let feat_idx = schema
        .feature_columns
        .iter()
        .map(|c| find(&c.name))
        .collect::<Result<Vec<_>>>()?;

    let mut table = RawTable {
        features: schema
            .feature_columns
            .iter()
            .map(|c| match c.kind {
                FeatureKind::Numeric => RawColumn::Numeric(Vec::new()),
                FeatureKind::Categorical => RawColumn::Categorical(Vec::new()),
            })
            .collect(),
        labels: Vec::new(),
        sensitive: Vec::new(),
        dropped_missing: 0,
        dropped_unknown_sensitive: 0,
    };
    let is_missing = |v: &str| schema.missing_values.iter().any(|m| m == v);

    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let used = std::iter::once(label_idx).chain(sens_idx.iter().copied()).chain(feat_idx.iter().copied());
        let mut missing = false;
        for i in used {
            match record.get(i) {
                Some(v) if !is_missing(v) => {}
                _ => missing = true,
            }
        }
        if missing {
            table.dropped_missing += 1;
            continue;
        }
        let mut sens = Vec::with_capacity(sens_idx.len());
        for (col, &i) in schema.sensitive_columns.iter().zip(&sens_idx) {
            match schema.sensitive_value_maps[col].get(&record[i]) {
                Some(&g) => sens.push(g),
                None => break,
            }
        }
        if sens.len() != sens_idx.len() {
            table.dropped_unknown_sensitive += 1;
            continue;
        }
        // parse numerics before pushing anything so a row is all-or-nothing
        let mut numeric = Vec::new();
        for (c, &i) in schema.feature_columns.iter().zip(&feat_idx) {
            if c.kind == FeatureKind::Numeric {
                let v: f64 = record[i].parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("column `{}`: cannot parse `{}` as a number", c.name, &record[i]),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        message: format!("column `{}`: non-finite value", c.name),
                    });
                }
                numeric.push(v);
            }
        }
        let mut numeric = numeric.into_iter();
        for (col, &i) in table.features.iter_mut().zip(&feat_idx) {
            match col {
                RawColumn::Numeric(v) => v.push(numeric.next().unwrap()),
                RawColumn::Categorical(v) => v.push(record[i].to_string()),
            }
        }
        table.labels.push((record[label_idx] == *schema.positive_label_value) as u8);
        table.sensitive.push(sens);
    }
    Ok(table)
}
