//! Histogram-based gradient-boosted regression trees.
//!
//! Squared-error objective (gradient `prediction - target`, hessian 1),
//! depth-wise growth, quantile bins, second-order split gain with an L2
//! leaf penalty, per-round shrinkage from [`EtaSchedule`] and MAE-monitored
//! early stopping.

mod binning;
mod histogram;
mod train;
mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use binning::{quantize_features, BinMapper, BinnedMatrix};
pub use histogram::{best_split, split_gain, BinStat, Histogram, SplitCandidate};
pub use train::{train_gbdt, RoundMetrics, TreeEnsemble};
pub use tree::{Node, Tree};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GbdtError {
    #[error("training data is empty")]
    EmptyTrainingData,
    #[error("invalid gbdt config: {0}")]
    InvalidConfig(String),
    #[error("feature arity mismatch: model expects {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("{rows} rows but {targets} targets")]
    TargetLength { rows: usize, targets: usize },
    #[error("malformed tree: {0}")]
    MalformedTree(String),
}

/// Per-round learning rate `eta_min + (eta_base - eta_min)·exp(-(x/8)² / max_iter_decay)`
/// with `x = iteration + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaSchedule {
    pub eta_base: f64,
    pub eta_min: f64,
    pub max_iter_decay: f64,
}

impl Default for EtaSchedule {
    fn default() -> Self {
        EtaSchedule {
            eta_base: 0.5,
            eta_min: 0.2,
            max_iter_decay: 100_000.0,
        }
    }
}

impl EtaSchedule {
    /// A schedule pinned at `eta` every round.
    pub fn constant(eta: f64) -> Self {
        EtaSchedule {
            eta_base: eta,
            eta_min: eta,
            max_iter_decay: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), GbdtError> {
        if !(self.eta_min > 0.0 && self.eta_min <= self.eta_base && self.eta_base <= 1.0) {
            return Err(GbdtError::InvalidConfig(format!(
                "eta schedule needs 0 < eta_min <= eta_base <= 1, got min {} base {}",
                self.eta_min, self.eta_base
            )));
        }
        if !(self.max_iter_decay > 0.0 && self.max_iter_decay.is_finite()) {
            return Err(GbdtError::InvalidConfig("max_iter_decay must be positive".into()));
        }
        Ok(())
    }

    /// The decaying part above `eta_min`. Stays strictly positive long after
    /// `eta_min + excess` has rounded to `eta_min` in double precision.
    pub fn excess(&self, iteration: usize) -> f64 {
        let x = (iteration + 1) as f64;
        (self.eta_base - self.eta_min) * (-(x / 8.0).powi(2) / self.max_iter_decay).exp()
    }
}

pub fn eta_decay(iteration: usize, schedule: &EtaSchedule) -> f64 {
    schedule.eta_min + schedule.excess(iteration)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtConfig {
    pub max_depth: usize,
    pub num_rounds: usize,
    pub early_stopping_rounds: usize,
    pub n_bins: usize,
    pub lambda: f64,
    pub min_child_weight: f64,
    pub eta: EtaSchedule,
    /// Recorded for provenance; training has no stochastic component.
    pub seed: u64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig {
            max_depth: 5,
            num_rounds: 500,
            early_stopping_rounds: 500,
            n_bins: 256,
            lambda: 1.0,
            min_child_weight: 1.0,
            eta: EtaSchedule::default(),
            seed: 0,
        }
    }
}

impl GbdtConfig {
    pub fn with_depth(max_depth: usize) -> Self {
        GbdtConfig {
            max_depth,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), GbdtError> {
        if self.max_depth < 1 {
            return Err(GbdtError::InvalidConfig("max_depth must be at least 1".into()));
        }
        if self.num_rounds < 1 {
            return Err(GbdtError::InvalidConfig("num_rounds must be at least 1".into()));
        }
        if !(2..=1024).contains(&self.n_bins) {
            return Err(GbdtError::InvalidConfig(format!(
                "n_bins must lie in [2, 1024], got {}",
                self.n_bins
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(GbdtError::InvalidConfig("lambda must be non-negative".into()));
        }
        if !(self.min_child_weight >= 0.0 && self.min_child_weight.is_finite()) {
            return Err(GbdtError::InvalidConfig("min_child_weight must be non-negative".into()));
        }
        self.eta.validate()
    }
}
