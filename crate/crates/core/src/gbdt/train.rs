use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::binning::{quantize_features, BinMapper, BinnedMatrix};
use super::histogram::{best_split, Histogram};
use super::tree::{Node, Tree};
use super::{eta_decay, GbdtConfig, GbdtError};
use crate::dataset::Labeled;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: usize,
    pub eta: f64,
    pub train_mae: f64,
    pub val_mae: f64,
}

/// Additive tree model. Each tree's leaves already include the round's eta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub n_features: usize,
    pub base_score: f64,
    pub trees: Vec<Tree>,
    pub etas: Vec<f64>,
    /// Every round that was trained, including those truncated away.
    pub history: Vec<RoundMetrics>,
    pub config: GbdtConfig,
}

impl TreeEnsemble {
    pub fn empty(n_features: usize, base_score: f64, config: GbdtConfig) -> Self {
        TreeEnsemble {
            n_features,
            base_score,
            trees: Vec::new(),
            etas: Vec::new(),
            history: Vec::new(),
            config,
        }
    }

    pub fn predict(&self, row: &[f64]) -> Result<f64, GbdtError> {
        if row.len() != self.n_features {
            return Err(GbdtError::ArityMismatch {
                expected: self.n_features,
                got: row.len(),
            });
        }
        Ok(self.predict_unchecked(row))
    }

    fn predict_unchecked(&self, row: &[f64]) -> f64 {
        let mut acc = self.base_score;
        for t in &self.trees {
            acc += t.predict(row);
        }
        acc
    }

    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Vec<f64>, GbdtError> {
        if x.ncols() != self.n_features {
            return Err(GbdtError::ArityMismatch {
                expected: self.n_features,
                got: x.ncols(),
            });
        }
        Ok((0..x.nrows())
            .into_par_iter()
            .map(|i| {
                let row = x.row(i);
                match row.as_slice() {
                    Some(s) => self.predict_unchecked(s),
                    None => self.predict_unchecked(&row.to_vec()),
                }
            })
            .collect())
    }

    /// Round (0-based) whose trees are kept, i.e. the best validation round.
    pub fn best_round(&self) -> Option<usize> {
        self.trees.len().checked_sub(1)
    }
}

struct GrowContext<'a> {
    binned: &'a BinnedMatrix,
    mapper: &'a BinMapper,
    bin_counts: Vec<usize>,
    grad: &'a [f64],
    hess: &'a [f64],
    cfg: &'a GbdtConfig,
}

struct Pending {
    node: usize,
    rows: Vec<u32>,
    hist: Option<Histogram>,
}

impl GrowContext<'_> {
    fn leaf_value(&self, rows: &[u32], eta: f64) -> f64 {
        let (g, h) = rows.iter().fold((0.0, 0.0), |(g, h), &r| {
            (g + self.grad[r as usize], h + self.hess[r as usize])
        });
        let denom = h + self.cfg.lambda;
        if denom > 0.0 {
            -eta * g / denom
        } else {
            0.0
        }
    }

    fn hess_sum(&self, rows: &[u32]) -> f64 {
        rows.iter().map(|&r| self.hess[r as usize]).sum()
    }

    fn splittable(&self, rows: &[u32]) -> bool {
        rows.len() >= 2 && self.hess_sum(rows) >= 2.0 * self.cfg.min_child_weight
    }

    fn histogram(&self, rows: &[u32]) -> Histogram {
        Histogram::build(self.binned, &self.bin_counts, rows, self.grad, self.hess)
    }

    /// Depth-wise growth. Returns the tree and, for each node that became a
    /// leaf, the rows routed to it.
    fn grow(&self, rows: Vec<u32>, eta: f64) -> (Tree, Vec<(usize, Vec<u32>)>) {
        let mut nodes = vec![Node::Leaf { value: 0.0 }];
        let mut leaves = Vec::new();
        let root_hist = self.splittable(&rows).then(|| self.histogram(&rows));
        let mut frontier = vec![Pending {
            node: 0,
            rows,
            hist: root_hist,
        }];

        for depth in 0..self.cfg.max_depth {
            let children_can_split = depth + 1 < self.cfg.max_depth;
            let mut next = Vec::new();
            for p in frontier {
                let split = p
                    .hist
                    .as_ref()
                    .and_then(|h| best_split(h, self.cfg.lambda, self.cfg.min_child_weight));
                let Some(split) = split else {
                    leaves.push((p.node, p.rows));
                    continue;
                };
                let col = &self.binned.columns[split.feature];
                let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = p
                    .rows
                    .iter()
                    .partition(|&&r| col[r as usize] as usize <= split.bin);

                let (left_hist, right_hist) = if children_can_split {
                    let parent = p.hist.as_ref().expect("split implies histogram");
                    // build the smaller child, derive the larger by subtraction
                    if left_rows.len() <= right_rows.len() {
                        let l = self.histogram(&left_rows);
                        let r = parent.subtract(&l);
                        (Some(l), Some(r))
                    } else {
                        let r = self.histogram(&right_rows);
                        let l = parent.subtract(&r);
                        (Some(l), Some(r))
                    }
                } else {
                    (None, None)
                };

                let left = nodes.len();
                let right = left + 1;
                nodes.push(Node::Leaf { value: 0.0 });
                nodes.push(Node::Leaf { value: 0.0 });
                nodes[p.node] = Node::Split {
                    feature: split.feature,
                    threshold: self.mapper.threshold(split.feature, split.bin),
                    left,
                    right,
                };
                let left_hist = left_hist.filter(|_| self.splittable(&left_rows));
                let right_hist = right_hist.filter(|_| self.splittable(&right_rows));
                next.push(Pending {
                    node: left,
                    rows: left_rows,
                    hist: left_hist,
                });
                next.push(Pending {
                    node: right,
                    rows: right_rows,
                    hist: right_hist,
                });
            }
            frontier = next;
            if frontier.is_empty() {
                break;
            }
        }
        leaves.extend(frontier.into_iter().map(|p| (p.node, p.rows)));

        for (node, rows) in &leaves {
            nodes[*node] = Node::Leaf {
                value: self.leaf_value(rows, eta),
            };
        }
        (Tree { nodes }, leaves)
    }
}

fn mean_abs_error(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter().zip(y).map(|(p, t)| (p - t).abs()).sum::<f64>() / y.len() as f64
}

/// Fits a boosted ensemble on `train`, monitoring MAE on `val` (or on
/// `train` when `val` is empty) and truncating to the best round.
pub fn train_gbdt(train: &Labeled, val: &Labeled, cfg: &GbdtConfig) -> Result<TreeEnsemble, GbdtError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(GbdtError::EmptyTrainingData);
    }
    for set in [train, val] {
        if set.x.nrows() != set.y.len() {
            return Err(GbdtError::TargetLength {
                rows: set.x.nrows(),
                targets: set.y.len(),
            });
        }
    }
    let n_features = train.x.ncols();
    if !val.is_empty() && val.x.ncols() != n_features {
        return Err(GbdtError::ArityMismatch {
            expected: n_features,
            got: val.x.ncols(),
        });
    }

    let (mapper, binned) = quantize_features(train.x.view(), cfg.n_bins);
    let n = train.len();
    let base_score = train.y.iter().sum::<f64>() / n as f64;
    let mut ensemble = TreeEnsemble::empty(n_features, base_score, *cfg);

    let mut train_pred = vec![base_score; n];
    let mut val_pred = vec![base_score; val.len()];
    let mut grad = vec![0.0; n];
    let hess = vec![1.0; n];
    let val_rows: Vec<Vec<f64>> = val.x.rows().into_iter().map(|r| r.to_vec()).collect();

    let mut best: Option<(usize, f64)> = None;
    for round in 0..cfg.num_rounds {
        let eta = eta_decay(round, &cfg.eta);
        for ((g, p), t) in grad.iter_mut().zip(&train_pred).zip(&train.y) {
            *g = p - t;
        }
        let ctx = GrowContext {
            binned: &binned,
            mapper: &mapper,
            bin_counts: (0..n_features).map(|f| mapper.n_bins(f)).collect(),
            grad: &grad,
            hess: &hess,
            cfg,
        };
        let (tree, leaves) = ctx.grow((0..n as u32).collect(), eta);
        for (node, rows) in &leaves {
            let Node::Leaf { value } = tree.nodes[*node] else {
                unreachable!("leaf list only holds leaves")
            };
            for &r in rows {
                train_pred[r as usize] += value;
            }
        }
        val_pred
            .par_iter_mut()
            .zip(&val_rows)
            .for_each(|(p, row)| *p += tree.predict(row));

        let train_mae = mean_abs_error(&train_pred, &train.y);
        let val_mae = if val.is_empty() {
            train_mae
        } else {
            mean_abs_error(&val_pred, &val.y)
        };
        ensemble.trees.push(tree);
        ensemble.etas.push(eta);
        ensemble.history.push(RoundMetrics {
            round,
            eta,
            train_mae,
            val_mae,
        });

        match best {
            Some((_, b)) if val_mae >= b => {}
            _ => best = Some((round, val_mae)),
        }
        let (best_round, _) = best.expect("set on first round");
        if round - best_round >= cfg.early_stopping_rounds {
            break;
        }
    }

    if let Some((best_round, _)) = best {
        ensemble.trees.truncate(best_round + 1);
        ensemble.etas.truncate(best_round + 1);
    }
    Ok(ensemble)
}
