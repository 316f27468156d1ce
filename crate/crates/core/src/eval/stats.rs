use serde::Serialize;

use super::EvalError;
use crate::dataset::{feature_names, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryStats {
    pub count: usize,
    pub mean: f64,
    /// Sample deviation (divisor n - 1); NaN for a single value.
    pub std: f64,
    pub min: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub max: f64,
}

/// Linear interpolation between order statistics at position `(n-1)·p`.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summary_stats(values: &[f64]) -> Result<SummaryStats, EvalError> {
    if values.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(SummaryStats {
        count: values.len(),
        mean,
        std: (ss / (n - 1.0)).sqrt(),
        min: sorted[0],
        q25: quantile(&sorted, 0.25),
        q50: quantile(&sorted, 0.5),
        q75: quantile(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    })
}

/// Statistics for every feature column, the implied volatilities that are
/// present and the midpoint, in that order.
pub fn column_summaries(ds: &Dataset) -> Result<Vec<(String, SummaryStats)>, EvalError> {
    let x = ds.feature_matrix();
    let mut out = Vec::new();
    for (name, col) in feature_names().into_iter().zip(x.columns()) {
        out.push((name, summary_stats(&col.to_vec())?));
    }
    let ivs: Vec<f64> = ds.samples.iter().filter_map(|s| s.implied_vol).collect();
    if !ivs.is_empty() {
        out.push(("implied_vol".into(), summary_stats(&ivs)?));
    }
    out.push(("midpoint".into(), summary_stats(&ds.targets())?));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

/// Equal-width bins over `[min, max]`, the last one closed. A constant
/// column yields a single bin holding every value.
pub fn histogram(values: &[f64], n_bins: usize) -> Result<Vec<HistogramBin>, EvalError> {
    if values.is_empty() {
        return Err(EvalError::Empty);
    }
    if n_bins == 0 {
        return Err(EvalError::NoBins);
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Ok(vec![HistogramBin {
            lower: lo,
            upper: hi,
            count: values.len(),
        }]);
    }
    let width = (hi - lo) / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    for v in values {
        let b = (((v - lo) / (hi - lo)) * n_bins as f64) as usize;
        counts[b.min(n_bins - 1)] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(b, count)| HistogramBin {
            lower: lo + width * b as f64,
            upper: if b + 1 == n_bins { hi } else { lo + width * (b + 1) as f64 },
            count,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn four_values() {
        let s = summary_stats(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.q50, 2.5);
        assert_eq!((s.q25, s.q75), (1.75, 3.25));
        assert!((s.std - 1.2909944487358056).abs() < 1e-15);
        assert_eq!((s.min, s.max, s.count), (1.0, 4.0, 4));
    }

    #[test]
    fn constant_column() {
        let s = summary_stats(&[7.0; 5]).unwrap();
        assert_eq!(s.std, 0.0);
        assert!([s.min, s.q25, s.q50, s.q75, s.max].iter().all(|&q| q == 7.0));
        let h = histogram(&[7.0; 5], 4).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h[0].count, 5);
    }

    #[test]
    fn closed_forms_on_one_to_n() {
        let n = 1000;
        let v: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let s = summary_stats(&v).unwrap();
        let nf = n as f64;
        assert!((s.mean - (nf + 1.0) / 2.0).abs() < 1e-12);
        assert!((s.std - (nf * (nf + 1.0) / 12.0).sqrt()).abs() < 1e-12);
        assert!((s.q50 - (nf + 1.0) / 2.0).abs() < 1e-12);
        assert!((s.q25 - (1.0 + 0.25 * (nf - 1.0))).abs() < 1e-12);
    }

    #[test]
    fn two_bin_split() {
        let h = histogram(&[0.0, 1.0, 2.0, 3.0], 2).unwrap();
        assert_eq!(h.iter().map(|b| b.count).collect::<Vec<_>>(), vec![2, 2]);
        assert_eq!((h[0].lower, h[0].upper, h[1].upper), (0.0, 1.5, 3.0));
    }

    #[test]
    fn empty_inputs_are_errors() {
        assert_eq!(summary_stats(&[]), Err(EvalError::Empty));
        assert_eq!(histogram(&[], 3), Err(EvalError::Empty));
    }

    proptest! {
        #[test]
        fn histogram_conserves_count(v in prop::collection::vec(-1e6f64..1e6, 1..300), n_bins in 1usize..40) {
            let h = histogram(&v, n_bins).unwrap();
            prop_assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), v.len());
        }
    }
}
