//! Error metrics, price-binned error curves, descriptive statistics and
//! model comparison reports.

mod baselines;
mod report;
mod stats;

use thiserror::Error;

use crate::blackscholes::BsError;

pub use baselines::{bs_implied_vol_predictions, bs_realized_vol_predictions, BS_IMPLIED, BS_REALIZED, MIN_REALIZED_VOL};
pub use report::{
    compare_models, render_table, target_digest, write_histograms, write_report, write_summaries, EvalReport,
    ModelResult, ReportRow,
};
pub use stats::{column_summaries, histogram, summary_stats, HistogramBin, SummaryStats};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("{predictions} predictions but {targets} targets")]
    LengthMismatch { predictions: usize, targets: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("target {index} is {value}; percentage error needs positive targets")]
    NonPositiveTarget { index: usize, value: f64 },
    #[error("bin count must be at least 1")]
    NoBins,
    #[error("model {model} was evaluated on different targets (digest {found}, expected {expected})")]
    InconsistentEvaluation {
        model: String,
        expected: String,
        found: String,
    },
    #[error("row {index} has no recorded implied volatility")]
    MissingImpliedVol { index: usize },
    #[error("row {index}: {source}")]
    Pricing {
        index: usize,
        #[source]
        source: BsError,
    },
}

fn check_pair(predictions: &[f64], targets: &[f64]) -> Result<(), EvalError> {
    if predictions.len() != targets.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            targets: targets.len(),
        });
    }
    if targets.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

fn check_positive(targets: &[f64]) -> Result<(), EvalError> {
    match targets.iter().position(|&t| !(t > 0.0)) {
        Some(index) => Err(EvalError::NonPositiveTarget {
            index,
            value: targets[index],
        }),
        None => Ok(()),
    }
}

/// `(1/n)·Σ|p - t|`
pub fn mae(predictions: &[f64], targets: &[f64]) -> Result<f64, EvalError> {
    check_pair(predictions, targets)?;
    let sum: f64 = predictions.iter().zip(targets).map(|(p, t)| (p - t).abs()).sum();
    Ok(sum / targets.len() as f64)
}

/// `(100/n)·Σ|p - t|/t`, in percent.
pub fn mape(predictions: &[f64], targets: &[f64]) -> Result<f64, EvalError> {
    check_pair(predictions, targets)?;
    check_positive(targets)?;
    let sum: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t).abs() / t)
        .sum();
    Ok(100.0 * sum / targets.len() as f64)
}

/// Errors of the targets falling in `[lower, upper)`; the last bin is closed.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedError {
    pub lower: f64,
    pub upper: f64,
    pub mae: Option<f64>,
    pub mape: Option<f64>,
    pub count: usize,
}

/// Buckets targets into `n_bins` log-spaced bins spanning `[min, max]` and
/// averages errors per bin. Empty bins carry `None` means.
pub fn binned_errors(predictions: &[f64], targets: &[f64], n_bins: usize) -> Result<Vec<BinnedError>, EvalError> {
    check_pair(predictions, targets)?;
    check_positive(targets)?;
    if n_bins == 0 {
        return Err(EvalError::NoBins);
    }
    let lo = targets.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = targets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
    let span = ln_hi - ln_lo;
    let edge = |i: usize| match i {
        0 => lo,
        i if i == n_bins => hi,
        i => (ln_lo + span * i as f64 / n_bins as f64).exp(),
    };

    let mut abs = vec![0.0; n_bins];
    let mut pct = vec![0.0; n_bins];
    let mut count = vec![0usize; n_bins];
    for (p, t) in predictions.iter().zip(targets) {
        let b = if span > 0.0 {
            ((((t.ln() - ln_lo) / span) * n_bins as f64) as usize).min(n_bins - 1)
        } else {
            0
        };
        let e = (p - t).abs();
        abs[b] += e;
        pct[b] += e / t;
        count[b] += 1;
    }
    Ok((0..n_bins)
        .map(|b| {
            let n = count[b] as f64;
            BinnedError {
                lower: edge(b),
                upper: edge(b + 1),
                mae: (count[b] > 0).then(|| abs[b] / n),
                mape: (count[b] > 0).then(|| 100.0 * pct[b] / n),
                count: count[b],
            }
        })
        .collect())
}
