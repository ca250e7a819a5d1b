//! JSON result records.

use std::path::Path;

use serde::{Deserialize, Serialize};

use csfair::metrics::MetricsReport;
use csfair::trainer::{EpochRecord, RunResult, TrainConfig};

use crate::error::CliResult;
use crate::prepare::DataInfo;

/// Bumped on any incompatible change to the record layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub train_seconds: f64,
}

/// Output of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub config: TrainConfig,
    pub data: DataInfo,
    pub seed: u64,
    pub epochs_run: usize,
    pub metrics: MetricsReport,
    pub history: Vec<EpochRecord>,
    pub timing: Timing,
}

impl ResultRecord {
    pub fn from_run(run: &RunResult, data: DataInfo) -> Self {
        ResultRecord {
            schema_version: SCHEMA_VERSION,
            config: run.config.clone(),
            data,
            seed: run.config.seed,
            epochs_run: run.epochs_run(),
            metrics: run.metrics.clone(),
            history: run.history.clone(),
            timing: Timing { train_seconds: run.seconds },
        }
    }
}

/// Output of `eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub schema_version: u32,
    pub model: String,
    pub data: DataInfo,
    pub metrics: MetricsReport,
}

/// Writes `text` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, &text)
}

/// `key=value` summary of the headline metrics.
pub fn summary_line(m: &MetricsReport) -> String {
    let f = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| format!("{v:.4}"));
    format!(
        "acc={} auc={} dp={} eo={} eodd={} abcc={}",
        f(m.acc),
        f(m.auc),
        f(m.dp),
        f(m.eo),
        f(m.eodd),
        f(m.abcc)
    )
}
