use rayon::prelude::*;

use super::EvalError;
use crate::blackscholes::{bs_price, BsError, ContractTerms};
use crate::dataset::Sample;
use crate::simgen::realized_vol;

pub const BS_IMPLIED: &str = "black-scholes (implied vol)";
pub const BS_REALIZED: &str = "black-scholes (realized vol)";

/// Realized volatility is floored here so flat lag histories still price.
pub const MIN_REALIZED_VOL: f64 = 1e-4;

fn price_all(samples: &[Sample], sigma: impl Fn(usize, &Sample) -> Result<f64, EvalError> + Sync) -> Result<Vec<f64>, EvalError> {
    samples
        .par_iter()
        .enumerate()
        .map(|(index, s)| {
            let terms = ContractTerms::from_features(&s.features);
            let sigma = sigma(index, s)?;
            bs_price(&terms.with_sigma(sigma)).map_err(|source| EvalError::Pricing { index, source })
        })
        .collect()
}

/// Prices every sample at its recorded implied volatility.
pub fn bs_implied_vol_predictions(samples: &[Sample]) -> Result<Vec<f64>, EvalError> {
    price_all(samples, |index, s| s.implied_vol.ok_or(EvalError::MissingImpliedVol { index }))
}

/// Prices every sample at the realized volatility of its lag window.
pub fn bs_realized_vol_predictions(samples: &[Sample]) -> Result<Vec<f64>, EvalError> {
    price_all(samples, |index, s| {
        let rv = realized_vol(s.features.lags()).map_err(|e| EvalError::Pricing {
            index,
            source: BsError::NoSolution(e.to_string()),
        })?;
        Ok(rv.max(MIN_REALIZED_VOL))
    })
}
