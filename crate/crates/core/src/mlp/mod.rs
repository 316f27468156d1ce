//! Dense feed-forward regression networks trained on mean absolute error
//! with Adam, a reduce-on-plateau learning rate and early stopping.

mod adam;
mod network;
mod schedule;
mod standardize;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::N_FEATURES;

pub use adam::{AdamConfig, AdamState};
pub use network::{Dense, DenseGrad, Network};
pub use schedule::{reduce_lr_on_plateau, EarlyStopping, PlateauScheduler};
pub use standardize::Standardizer;
pub use train::{train_mlp, EpochMetrics, NetworkModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlpError {
    #[error("training data is empty")]
    EmptyTrainingData,
    #[error("validation data is empty")]
    EmptyValidationData,
    #[error("invalid mlp config: {0}")]
    InvalidConfig(String),
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("input arity mismatch: network expects {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("{rows} rows but {targets} targets")]
    TargetLength { rows: usize, targets: usize },
    #[error("training diverged at epoch {epoch}: validation MAE {val_mae}")]
    Diverged { epoch: usize, val_mae: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub units: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn relu(units: usize) -> Self {
        LayerSpec {
            units,
            activation: Activation::Relu,
        }
    }

    pub fn linear(units: usize) -> Self {
        LayerSpec {
            units,
            activation: Activation::Linear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub layers: Vec<LayerSpec>,
}

impl Architecture {
    /// 256 → 128 → 1.
    pub fn three_layer() -> Self {
        Architecture {
            input_dim: N_FEATURES,
            layers: vec![LayerSpec::relu(256), LayerSpec::relu(128), LayerSpec::linear(1)],
        }
    }

    /// 256 → 128 → 64 → 32 → 1.
    pub fn five_layer() -> Self {
        Architecture {
            input_dim: N_FEATURES,
            layers: vec![
                LayerSpec::relu(256),
                LayerSpec::relu(128),
                LayerSpec::relu(64),
                LayerSpec::relu(32),
                LayerSpec::linear(1),
            ],
        }
    }

    pub fn validate(&self) -> Result<(), MlpError> {
        if self.input_dim == 0 {
            return Err(MlpError::InvalidArchitecture("input_dim must be positive".into()));
        }
        match self.layers.last() {
            Some(LayerSpec {
                units: 1,
                activation: Activation::Linear,
            }) => {}
            _ => {
                return Err(MlpError::InvalidArchitecture(
                    "output layer must be a single linear unit".into(),
                ))
            }
        }
        if self.layers.iter().any(|l| l.units == 0) {
            return Err(MlpError::InvalidArchitecture("layer with zero units".into()));
        }
        Ok(())
    }

    pub fn units(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.units).collect()
    }

    pub fn param_count(&self) -> usize {
        let mut fan_in = self.input_dim;
        let mut total = 0;
        for l in &self.layers {
            total += fan_in * l.units + l.units;
            fan_in = l.units;
        }
        total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpTrainConfig {
    pub initial_lr: f64,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub min_lr: f64,
    pub early_stop_patience: usize,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for MlpTrainConfig {
    fn default() -> Self {
        MlpTrainConfig {
            initial_lr: 0.01,
            plateau_factor: 0.1,
            plateau_patience: 10,
            min_lr: 1e-6,
            early_stop_patience: 150,
            max_epochs: 1000,
            batch_size: 4096,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl MlpTrainConfig {
    pub fn validate(&self) -> Result<(), MlpError> {
        let bad = |msg: &str| Err(MlpError::InvalidConfig(msg.into()));
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return bad("plateau_factor must lie in (0, 1)");
        }
        if !(self.min_lr > 0.0 && self.min_lr < self.initial_lr && self.initial_lr.is_finite()) {
            return bad("need 0 < min_lr < initial_lr");
        }
        if self.plateau_patience == 0 || self.early_stop_patience == 0 {
            return bad("patience must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        self.adam.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_parameter_counts() {
        assert_eq!(Architecture::three_layer().param_count(), 26 * 256 + 256 + 256 * 128 + 128 + 128 + 1);
        assert_eq!(Architecture::three_layer().param_count(), 39_937);
        let five = 26 * 256 + 256 + 256 * 128 + 128 + 128 * 64 + 64 + 64 * 32 + 32 + 32 + 1;
        assert_eq!(Architecture::five_layer().param_count(), five);
        assert_eq!(five, 50_177);
        assert_eq!(Architecture::three_layer().units(), vec![256, 128, 1]);
    }

    #[test]
    fn output_layer_must_be_scalar_linear() {
        let mut a = Architecture::three_layer();
        assert!(a.validate().is_ok());
        a.layers.push(LayerSpec::relu(1));
        assert!(a.validate().is_err());
        a.layers.pop();
        a.layers.push(LayerSpec::linear(2));
        assert!(a.validate().is_err());
    }

    #[test]
    fn config_defaults_validate() {
        let cfg = MlpTrainConfig::default();
        assert!(cfg.validate().is_ok());
        assert!(MlpTrainConfig { plateau_factor: 1.0, ..cfg }.validate().is_err());
        assert!(MlpTrainConfig { min_lr: 0.1, ..cfg }.validate().is_err());
    }
}
