//! Fairness-regularized training with the Cauchy-Schwarz divergence.
//!
//! The crate bundles:
//!
//! - [`kernels`]: positive-definite kernels, Gram sums and the median heuristic.
//! - [`divergence`]: differentiable estimators (CS, MMD², HSIC, mean disparity,
//!   prejudice index, Gaussian-moment KL, distance covariance).
//! - [`gaussian_oracle`]: closed-form Gaussian CS/KL and quadrature oracles.
//! - [`model`]: a small MLP with exact backpropagation and checkpointing.
//! - [`trainer`]: objective assembly, Adam with step decay, sweeps.
//! - [`metrics`]: utility and group-fairness metrics.
//! - [`data`]: CSV ingestion, preprocessing, splitting and a synthetic generator.

pub mod data;
pub mod divergence;
pub mod error;
pub mod gaussian_oracle;
pub mod kernels;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod trainer;

pub use error::{Error, Result};
