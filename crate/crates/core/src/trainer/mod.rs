//! Objective assembly, mini-batch training and hyperparameter sweeps.

mod fairness;
mod run;
mod sweep;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kernels::KernelSpec;
use crate::model::DEFAULT_HIDDEN;

pub use fairness::{fairness_batch_loss, FairnessLoss};
pub use run::{batch_objective, evaluate_model, train, BatchObjective, EpochRecord, RunResult};
pub use sweep::{sweep, SweepCell};

/// Fairness penalty added to the classification loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularizer {
    None,
    Cs,
    Mmd,
    Hsic,
    DpGap,
    EoGap,
    EoddGap,
    Pr,
    Kl,
    Dcov,
}

impl Regularizer {
    pub const ALL: [Regularizer; 10] = [
        Regularizer::None,
        Regularizer::Cs,
        Regularizer::Mmd,
        Regularizer::Hsic,
        Regularizer::DpGap,
        Regularizer::EoGap,
        Regularizer::EoddGap,
        Regularizer::Pr,
        Regularizer::Kl,
        Regularizer::Dcov,
    ];

    /// Short command-line name.
    pub fn name(self) -> &'static str {
        match self {
            Regularizer::None => "none",
            Regularizer::Cs => "cs",
            Regularizer::Mmd => "mmd",
            Regularizer::Hsic => "hsic",
            Regularizer::DpGap => "dp",
            Regularizer::EoGap => "eo",
            Regularizer::EoddGap => "eodd",
            Regularizer::Pr => "pr",
            Regularizer::Kl => "kl",
            Regularizer::Dcov => "dcov",
        }
    }

    /// Accepts the short names and the `*_gap` spellings.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let alias = match s.as_str() {
            "dp_gap" => "dp",
            "eo_gap" => "eo",
            "eodd_gap" => "eodd",
            other => other,
        };
        Self::ALL
            .into_iter()
            .find(|r| r.name() == alias)
            .map_or_else(|| invalid(format!("unknown regularizer `{s}`")), Ok)
    }

    /// Estimators that only make sense on scalar predictions.
    pub fn scalar_only(self) -> bool {
        matches!(
            self,
            Regularizer::DpGap | Regularizer::EoGap | Regularizer::EoddGap | Regularizer::Pr | Regularizer::Kl
        )
    }

    /// MMD compares representations by default; everything else predictions.
    pub fn default_target(self) -> Target {
        if self == Regularizer::Mmd {
            Target::Hidden
        } else {
            Target::Prediction
        }
    }
}

/// Conditioning that defines the compared sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Split by group only.
    Dp,
    /// Split by group among positive-label rows.
    Eo,
    /// Sum of the per-label conditional losses.
    Eodd,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dp" => Ok(Mode::Dp),
            "eo" => Ok(Mode::Eo),
            "eodd" => Ok(Mode::Eodd),
            other => invalid(format!("unknown mode `{other}`")),
        }
    }
}

/// What the fairness estimator is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// Output probabilities.
    Prediction,
    /// Activations of the last hidden layer.
    Hidden,
}

impl Target {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "prediction" => Ok(Target::Prediction),
            "hidden" => Ok(Target::Hidden),
            other => invalid(format!("unknown target `{other}`")),
        }
    }
}

/// How several sensitive columns are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiAttr {
    /// First sensitive column only.
    Single,
    /// Sum of the losses of each column.
    SumPerAttribute,
    /// Worst pair of the cross-product groups.
    JointGroups,
}

/// Normalization of the L2 term `(β/2)·‖W‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum L2Reduction {
    /// Divided by the number of weights, so β is insensitive to model size.
    Mean,
    /// Plain sum over all weights.
    Sum,
}

impl L2Reduction {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mean" => Ok(L2Reduction::Mean),
            "sum" => Ok(L2Reduction::Sum),
            other => invalid(format!("unknown L2 reduction `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub regularizer: Regularizer,
    pub mode: Mode,
    pub target: Target,
    pub alpha: f64,
    pub beta: f64,
    pub l2_reduction: L2Reduction,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub step_size: usize,
    pub gamma: f64,
    pub lr_floor: f64,
    pub kernel: KernelSpec,
    pub seed: u64,
    pub multi_attr: MultiAttr,
    pub hidden: Vec<usize>,
    /// Decision threshold for the final evaluation.
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            regularizer: Regularizer::None,
            mode: Mode::Dp,
            target: Target::Prediction,
            alpha: 0.0,
            beta: 0.0,
            l2_reduction: L2Reduction::Mean,
            lr: 1e-2,
            epochs: 150,
            batch_size: 1024,
            step_size: 50,
            gamma: 0.1,
            lr_floor: 1e-5,
            kernel: KernelSpec::median(crate::kernels::KernelFamily::GaussianRbf),
            seed: 0,
            multi_attr: MultiAttr::Single,
            hidden: DEFAULT_HIDDEN.to_vec(),
            threshold: crate::metrics::DEFAULT_THRESHOLD,
        }
    }
}

impl TrainConfig {
    /// Defaults with `regularizer` and its default target.
    pub fn with_regularizer(regularizer: Regularizer) -> Self {
        TrainConfig { regularizer, target: regularizer.default_target(), ..Default::default() }
    }

    /// Checks value ranges and the regularizer/mode/target combination.
    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                invalid(format!("{name} must be finite and non-negative, got {v}"))
            }
        };
        nonneg("alpha", self.alpha)?;
        nonneg("beta", self.beta)?;
        nonneg("lr_floor", self.lr_floor)?;
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return invalid(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return invalid(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return invalid(format!("threshold must lie in (0, 1), got {}", self.threshold));
        }
        for (name, v) in [("epochs", self.epochs), ("batch_size", self.batch_size), ("step_size", self.step_size)] {
            if v == 0 {
                return invalid(format!("{name} must be at least 1"));
            }
        }
        if self.hidden.contains(&0) {
            return invalid("hidden layer widths must be at least 1");
        }
        self.kernel.validate()?;
        self.check_combination()
    }

    fn check_combination(&self) -> Result<()> {
        let reg = self.regularizer;
        match (reg, self.mode) {
            (Regularizer::EoGap, m) if m != Mode::Eo => {
                return invalid("regularizer eo requires mode eo");
            }
            (Regularizer::EoddGap, m) if m != Mode::Eodd => {
                return invalid("regularizer eodd requires mode eodd");
            }
            _ => {}
        }
        if self.target == Target::Hidden {
            if reg.scalar_only() {
                return invalid(format!(
                    "regularizer {} is defined on prediction probabilities and cannot use target hidden",
                    reg.name()
                ));
            }
            if self.hidden.is_empty() {
                return invalid("target hidden requires at least one hidden layer");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        for r in Regularizer::ALL {
            assert_eq!(Regularizer::parse(r.name()).unwrap(), r);
        }
        assert_eq!(Regularizer::parse("dp_gap").unwrap(), Regularizer::DpGap);
        assert!(Regularizer::parse("foo").is_err());
    }

    #[test]
    fn default_targets() {
        assert_eq!(TrainConfig::with_regularizer(Regularizer::Mmd).target, Target::Hidden);
        assert_eq!(TrainConfig::with_regularizer(Regularizer::Cs).target, Target::Prediction);
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn invalid_combinations() {
        let mut c = TrainConfig::with_regularizer(Regularizer::Pr);
        c.target = Target::Hidden;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::with_regularizer(Regularizer::EoGap);
        assert!(c.validate().is_err());
        c.mode = Mode::Eo;
        c.validate().unwrap();
        let mut c = TrainConfig::with_regularizer(Regularizer::Cs);
        c.target = Target::Hidden;
        c.validate().unwrap();
        c.hidden.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn invalid_ranges() {
        let cases: [fn(&mut TrainConfig); 6] = [
            |c| c.alpha = -1.0,
            |c| c.beta = f64::NAN,
            |c| c.gamma = 0.0,
            |c| c.lr = 0.0,
            |c| c.batch_size = 0,
            |c| c.hidden = vec![4, 0],
        ];
        for f in cases {
            let mut c = TrainConfig::default();
            f(&mut c);
            assert!(c.validate().is_err());
        }
    }

    #[test]
    fn serde_round_trip() {
        let c = TrainConfig::with_regularizer(Regularizer::Hsic);
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<TrainConfig>(&text).unwrap(), c);
    }
}
