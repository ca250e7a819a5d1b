//! Effective training configuration: flags over config file over defaults.

use std::path::Path;

use serde::Deserialize;

use csfair::kernels::{Bandwidth, KernelFamily, KernelSpec};
use csfair::trainer::{L2Reduction, Mode, MultiAttr, Regularizer, Target, TrainConfig};

use super::env_seed;
use crate::args::TrainFlags;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum BandwidthValue {
    Width(f64),
    Named(String),
}

/// Every field optional; unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub regularizer: Option<String>,
    pub mode: Option<String>,
    pub target: Option<String>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub l2_reduction: Option<String>,
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub step_size: Option<usize>,
    pub gamma: Option<f64>,
    pub lr_floor: Option<f64>,
    pub kernel: Option<String>,
    pub bandwidth: Option<BandwidthValue>,
    pub multi_attr: Option<String>,
    pub hidden: Option<Vec<usize>>,
    pub threshold: Option<f64>,
    pub seed: Option<u64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("--config `{}`: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("--config `{}`: {e}", path.display())))
    }
}

fn field<T>(name: &str, parsed: csfair::Result<T>) -> CliResult<T> {
    parsed.map_err(|e| CliError::config(format!("{name}: {e}")))
}

fn parse_bandwidth(v: BandwidthValue) -> CliResult<Bandwidth> {
    match v {
        BandwidthValue::Width(w) => Ok(Bandwidth::Fixed(w)),
        BandwidthValue::Named(s) if s.trim().eq_ignore_ascii_case("median") => Ok(Bandwidth::MedianHeuristic),
        BandwidthValue::Named(s) => s
            .trim()
            .parse()
            .map(Bandwidth::Fixed)
            .map_err(|_| CliError::config(format!("bandwidth: expected a number or `median`, got `{s}`"))),
    }
}

fn parse_multi_attr(s: &str) -> csfair::Result<MultiAttr> {
    match s.trim().to_ascii_lowercase().as_str() {
        "single" => Ok(MultiAttr::Single),
        "sum_per_attribute" | "sum" => Ok(MultiAttr::SumPerAttribute),
        "joint_groups" | "joint" => Ok(MultiAttr::JointGroups),
        other => Err(csfair::Error::InvalidArgument(format!("unknown multi-attribute mode `{other}`"))),
    }
}

fn parse_hidden(s: &str) -> CliResult<Vec<usize>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| CliError::config(format!("hidden: cannot parse `{t}` as a width"))))
        .collect()
}

/// Merges flags, the optional config file and defaults into a validated
/// config. The seed falls back to `CSFAIR_SEED`, then 0.
pub fn resolve(flags: &TrainFlags, seed: Option<u64>) -> CliResult<TrainConfig> {
    let file = match &flags.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let d = TrainConfig::default();

    let regularizer = match flags.regularizer.as_deref().or(file.regularizer.as_deref()) {
        Some(s) => field("reg", Regularizer::parse(s))?,
        None => d.regularizer,
    };
    let mode = match flags.mode.as_deref().or(file.mode.as_deref()) {
        Some(s) => field("mode", Mode::parse(s))?,
        None => match regularizer {
            Regularizer::EoGap => Mode::Eo,
            Regularizer::EoddGap => Mode::Eodd,
            _ => d.mode,
        },
    };
    let target = match flags.target.as_deref().or(file.target.as_deref()) {
        Some(s) => field("target", Target::parse(s))?,
        None => regularizer.default_target(),
    };
    let family = match flags.kernel.as_deref().or(file.kernel.as_deref()) {
        Some(s) => field("kernel", KernelFamily::parse(s))?,
        None => d.kernel.family,
    };
    let bandwidth = match flags.bandwidth.clone().map(BandwidthValue::Named).or(file.bandwidth) {
        Some(v) => parse_bandwidth(v)?,
        None => d.kernel.bandwidth,
    };
    let multi_attr = match flags.multi_attr.as_deref().or(file.multi_attr.as_deref()) {
        Some(s) => field("multi_attr", parse_multi_attr(s))?,
        None => d.multi_attr,
    };
    let hidden = match &flags.hidden {
        Some(s) => parse_hidden(s)?,
        None => file.hidden.unwrap_or(d.hidden),
    };
    let l2_reduction = match flags.l2_reduction.as_deref().or(file.l2_reduction.as_deref()) {
        Some(s) => field("l2_reduction", L2Reduction::parse(s))?,
        None => d.l2_reduction,
    };
    let seed = match seed.or(file.seed) {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };

    let config = TrainConfig {
        regularizer,
        mode,
        target,
        alpha: flags.alpha.or(file.alpha).unwrap_or(d.alpha),
        beta: flags.beta.or(file.beta).unwrap_or(d.beta),
        l2_reduction,
        lr: flags.lr.or(file.lr).unwrap_or(d.lr),
        epochs: flags.epochs.or(file.epochs).unwrap_or(d.epochs),
        batch_size: flags.batch_size.or(file.batch_size).unwrap_or(d.batch_size),
        step_size: flags.step_size.or(file.step_size).unwrap_or(d.step_size),
        gamma: flags.gamma.or(file.gamma).unwrap_or(d.gamma),
        lr_floor: flags.lr_floor.or(file.lr_floor).unwrap_or(d.lr_floor),
        kernel: KernelSpec { family, bandwidth },
        seed,
        multi_attr,
        hidden,
        threshold: flags.threshold.or(file.threshold).unwrap_or(d.threshold),
    };
    config.validate().map_err(|e| CliError::config(format!("invalid configuration: {e}")))?;
    Ok(config)
}
