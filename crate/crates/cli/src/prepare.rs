//! Data loading and train/test preparation shared by `train`, `sweep` and `eval`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use csfair::data::{load_csv, preprocess, stratified_split_indices, Dataset, Schema};

use crate::args::DataArgs;
use crate::error::{CliError, CliResult};

pub const DEFAULT_SPLIT_FRAC: f64 = 0.2;

/// Where the data came from and how it was split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataInfo {
    pub data: PathBuf,
    pub schema: PathBuf,
    pub split_frac: f64,
    pub split_seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub dropped_rows: usize,
    pub unseen_categories: usize,
}

pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
    pub info: DataInfo,
}

fn require_file(path: Option<&PathBuf>, flag: &str) -> CliResult<PathBuf> {
    let path = path.ok_or_else(|| CliError::config(format!("--{flag} is required")))?;
    if !path.is_file() {
        return Err(CliError::config(format!("--{flag}: file `{}` not found", path.display())));
    }
    Ok(path.clone())
}

pub fn load_schema(path: &Path) -> CliResult<Schema> {
    let text = std::fs::read_to_string(path)?;
    let schema: Schema = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("schema `{}`: {e}", path.display())))?;
    schema.validate()?;
    Ok(schema)
}

/// Loads the CSV, splits the raw rows, fits preprocessing on the training
/// part only and applies it to both parts.
pub fn prepare(args: &DataArgs) -> CliResult<Prepared> {
    let data = require_file(args.data.as_ref(), "data")?;
    let schema_path = require_file(args.schema.as_ref(), "schema")?;
    let split_frac = args.split_frac.unwrap_or(DEFAULT_SPLIT_FRAC);
    if !(split_frac > 0.0 && split_frac < 1.0) {
        return Err(CliError::config(format!("--split-frac must lie in (0, 1), got {split_frac}")));
    }
    let split_seed = args.split_seed.unwrap_or(0);
    let schema = load_schema(&schema_path)?;
    let raw = load_csv(&data, &schema)?;
    if raw.dropped_count() > 0 {
        eprintln!(
            "note: dropped {} rows with missing values and {} with unknown sensitive values",
            raw.dropped_missing, raw.dropped_unknown_sensitive
        );
    }
    let (tr_idx, te_idx) = stratified_split_indices(&raw.labels, split_frac, split_seed)?;
    let train = preprocess(&raw.select(&tr_idx), &schema, None)?;
    let test = preprocess(&raw.select(&te_idx), &schema, Some(&train.stats))?;
    let info = DataInfo {
        data,
        schema: schema_path,
        split_frac,
        split_seed,
        n_train: train.len(),
        n_test: test.len(),
        dropped_rows: raw.dropped_count(),
        unseen_categories: test.unseen_categories,
    };
    Ok(Prepared { train, test, info })
}
