use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "csfair", version, about = "Fairness-regularized classifiers with divergence penalties")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one model and write a JSON result record.
    Train(TrainArgs),
    /// Train over an (alpha, beta, seed) grid and write a CSV table.
    Sweep(SweepArgs),
    /// Evaluate a saved model on the test split of a dataset.
    Eval(EvalArgs),
    /// Check the CS ≤ KL inequality and the quadrature agreement suite.
    Verify(VerifyArgs),
    /// Write a synthetic biased dataset with its schema.
    GenSynth(GenSynthArgs),
}

/// Data location and the train/test split.
#[derive(Debug, Args, Clone)]
pub struct DataArgs {
    /// Input CSV file.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// JSON schema describing the CSV columns.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Fraction of rows held out for testing.
    #[arg(long)]
    pub split_frac: Option<f64>,
    /// Seed of the stratified train/test split.
    #[arg(long)]
    pub split_seed: Option<u64>,
}

/// Training hyperparameters; each overrides the config file.
#[derive(Debug, Args, Clone, Default)]
pub struct TrainFlags {
    /// JSON config file; flags take precedence over its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Fairness regularizer: none, cs, mmd, hsic, dp, eo, eodd, pr, kl, dcov.
    #[arg(long = "reg")]
    pub regularizer: Option<String>,
    /// Conditioning of the compared sets: dp, eo, eodd.
    #[arg(long)]
    pub mode: Option<String>,
    /// Estimator input: prediction or hidden.
    #[arg(long)]
    pub target: Option<String>,
    /// Weight of the fairness term.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Weight of the L2 term.
    #[arg(long)]
    pub beta: Option<f64>,
    /// L2 normalization: mean (over weights) or sum.
    #[arg(long)]
    pub l2_reduction: Option<String>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Epochs between learning-rate decays.
    #[arg(long)]
    pub step_size: Option<usize>,
    /// Learning-rate decay factor.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Training stops once the learning rate falls below this.
    #[arg(long)]
    pub lr_floor: Option<f64>,
    /// Kernel family: rbf, laplacian, poly2.
    #[arg(long)]
    pub kernel: Option<String>,
    /// Kernel width, or `median` for the median heuristic.
    #[arg(long)]
    pub bandwidth: Option<String>,
    /// Handling of several sensitive columns: single, sum_per_attribute, joint_groups.
    #[arg(long)]
    pub multi_attr: Option<String>,
    /// Hidden layer widths, comma separated (empty for none).
    #[arg(long)]
    pub hidden: Option<String>,
    /// Decision threshold for evaluation.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub flags: TrainFlags,
    /// Training seed (falls back to the config file, then CSFAIR_SEED).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output JSON record.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the trained model checkpoint here.
    #[arg(long)]
    pub save_model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub flags: TrainFlags,
    /// Fairness weights, comma separated.
    #[arg(long)]
    pub alphas: String,
    /// L2 weights, comma separated.
    #[arg(long)]
    pub betas: String,
    /// Training seeds, comma separated (default: CSFAIR_SEED or 0).
    #[arg(long)]
    pub seeds: Option<String>,
    /// Directory for the CSV table and per-cell records.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Cells trained concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Model checkpoint written by `train --save-model`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Output JSON (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Random Gaussian pairs per dimension.
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Dimensions, comma separated.
    #[arg(long, default_value = "1,2,5")]
    pub dims: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Instances of the quadrature agreement suite.
    #[arg(long, default_value_t = 20)]
    pub quadrature_instances: usize,
}

#[derive(Debug, Args)]
pub struct GenSynthArgs {
    /// Rows per (group, label) cell.
    #[arg(long, default_value_t = 500)]
    pub n_per_cell: usize,
    #[arg(long, default_value_t = 0.8)]
    pub bias: f64,
    #[arg(long, default_value_t = 6)]
    pub dim: usize,
    /// Generator seed (falls back to CSFAIR_SEED, then 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV; the schema and metadata files are written next to it.
    #[arg(long)]
    pub out: PathBuf,
}
