use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::network::Network;
use super::schedule::{EarlyStopping, PlateauScheduler};
use super::standardize::Standardizer;
use super::{Architecture, MlpError, MlpTrainConfig};
use crate::dataset::Labeled;

/// Validation MAE above this is treated as divergence.
const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f64,
    /// Mean absolute error over the epoch's minibatches, measured before each update.
    pub train_mae: f64,
    pub val_mae: f64,
}

/// A trained network together with the input scaling it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub network: Network,
    pub standardizer: Standardizer,
    pub history: Vec<EpochMetrics>,
    pub best_epoch: Option<usize>,
    pub config: MlpTrainConfig,
}

impl NetworkModel {
    pub fn n_features(&self) -> usize {
        self.network.input_dim()
    }

    /// Predictions for raw (unscaled) feature rows.
    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Vec<f64>, MlpError> {
        if x.ncols() != self.n_features() {
            return Err(MlpError::ShapeMismatch {
                expected: self.n_features(),
                got: x.ncols(),
            });
        }
        self.network.forward(self.standardizer.transform(x).view())
    }

    pub fn predict(&self, row: &[f64]) -> Result<f64, MlpError> {
        let x = ArrayView2::from_shape((1, row.len()), row).expect("one row");
        Ok(self.predict_batch(x)?[0])
    }
}

fn mean_abs_error(pred: &[f64], target: &[f64]) -> f64 {
    pred.iter().zip(target).map(|(p, t)| (p - t).abs()).sum::<f64>() / target.len() as f64
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Columns holding only 0 and 1 (the call/put flag) are not rescaled.
fn binary_columns(x: ArrayView2<f64>) -> Vec<usize> {
    x.axis_iter(Axis(1))
        .enumerate()
        .filter(|(_, col)| col.iter().all(|&v| v == 0.0 || v == 1.0))
        .map(|(j, _)| j)
        .collect()
}

fn check_split(data: &Labeled, arch: &Architecture) -> Result<(), MlpError> {
    if data.x.nrows() != data.y.len() {
        return Err(MlpError::TargetLength {
            rows: data.x.nrows(),
            targets: data.y.len(),
        });
    }
    if data.x.ncols() != arch.input_dim {
        return Err(MlpError::ShapeMismatch {
            expected: arch.input_dim,
            got: data.x.ncols(),
        });
    }
    Ok(())
}

/// Trains on minibatch MAE with Adam, cutting the learning rate on
/// validation plateaus and stopping `early_stop_patience` epochs after the
/// best validation epoch. Returns the parameters from that best epoch.
pub fn train_mlp(
    train: &Labeled,
    val: &Labeled,
    arch: &Architecture,
    cfg: &MlpTrainConfig,
) -> Result<NetworkModel, MlpError> {
    arch.validate()?;
    cfg.validate()?;
    if train.is_empty() {
        return Err(MlpError::EmptyTrainingData);
    }
    if val.is_empty() {
        return Err(MlpError::EmptyValidationData);
    }
    check_split(train, arch)?;
    check_split(val, arch)?;

    let standardizer = Standardizer::fit(train.x.view(), &binary_columns(train.x.view()));
    let xs = standardizer.transform(train.x.view());
    let xv = standardizer.transform(val.x.view());

    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);

    let mut net = Network::he_init(arch, &mut init_rng)?;
    // MAE is minimized by the median, so start the output there.
    net.layers.last_mut().expect("validated").bias[0] = median(&train.y);

    let mut adam = AdamState::new(&net, cfg.adam);
    let mut sched = PlateauScheduler::new(cfg);
    let mut stopper = EarlyStopping::new(cfg.early_stop_patience);
    let mut history = Vec::new();
    let mut best = (f64::INFINITY, net.clone());
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 0..cfg.max_epochs {
        let lr = sched.lr();
        order.shuffle(&mut shuffle_rng);
        let mut abs_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let xb = xs.select(Axis(0), batch);
            let tb: Vec<f64> = batch.iter().map(|&i| train.y[i]).collect();
            let (s, grads) = net.batch_gradients(xb.view(), &tb);
            abs_sum += s;
            adam.step(&mut net, &grads, lr);
        }
        let train_mae = abs_sum / train.len() as f64;
        let val_mae = mean_abs_error(&net.forward(xv.view())?, &val.y);
        if !val_mae.is_finite() || val_mae > DIVERGENCE_LIMIT {
            return Err(MlpError::Diverged { epoch, val_mae });
        }
        history.push(EpochMetrics {
            epoch,
            lr,
            train_mae,
            val_mae,
        });
        if val_mae < best.0 {
            best = (val_mae, net.clone());
        }
        sched.observe(val_mae);
        if stopper.observe(epoch, val_mae) {
            break;
        }
    }

    Ok(NetworkModel {
        network: best.1,
        standardizer,
        history,
        best_epoch: stopper.best_epoch(),
        config: *cfg,
    })
}
