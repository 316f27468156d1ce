use super::MlpTrainConfig;

/// Cuts the learning rate by `factor` after `patience` consecutive epochs
/// without a strictly lower validation loss, never going below `min_lr`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauScheduler {
    lr: f64,
    factor: f64,
    patience: usize,
    min_lr: f64,
    best: f64,
    wait: usize,
}

impl PlateauScheduler {
    pub fn new(cfg: &MlpTrainConfig) -> Self {
        PlateauScheduler {
            lr: cfg.initial_lr,
            factor: cfg.plateau_factor,
            patience: cfg.plateau_patience,
            min_lr: cfg.min_lr,
            best: f64::INFINITY,
            wait: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Records one epoch's validation loss and returns the rate for the next epoch.
    pub fn observe(&mut self, loss: f64) -> f64 {
        if loss < self.best {
            self.best = loss;
            self.wait = 0;
        } else {
            self.wait += 1;
            if self.wait >= self.patience {
                self.lr = (self.lr * self.factor).max(self.min_lr);
                self.wait = 0;
            }
        }
        self.lr
    }
}

/// Learning rate in effect after replaying `history` through a fresh scheduler.
pub fn reduce_lr_on_plateau(history: &[f64], cfg: &MlpTrainConfig) -> f64 {
    let mut sched = PlateauScheduler::new(cfg);
    for &loss in history {
        sched.observe(loss);
    }
    sched.lr()
}

/// Signals a stop once `patience` epochs have passed since the best one.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: Option<usize>,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: None,
        }
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }

    /// Returns true when training should halt after `epoch`.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> bool {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = Some(epoch);
        }
        match self.best_epoch {
            Some(best) => epoch - best >= self.patience,
            None => epoch + 1 >= self.patience,
        }
    }
}
