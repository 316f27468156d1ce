//! Canonical data model: option quotes, the 26-value feature encoding,
//! datasets, quote filtering and seeded train/validation/test splitting.

use std::collections::BTreeMap;
use std::fmt;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Number of past closing prices carried by every quote.
pub const N_LAGS: usize = 20;
/// Model input width: strike, underlying, rate, yield, maturity, call flag, 20 lags.
pub const N_FEATURES: usize = 6 + N_LAGS;
/// Exclusive upper bound on admissible midpoints.
pub const MAX_MIDPOINT: f64 = 100_000.0;
/// Upper bound on admissible implied volatilities.
pub const MAX_IMPLIED_VOL: f64 = 3.0;

pub const STRIKE: usize = 0;
pub const UNDERLYING: usize = 1;
pub const RATE: usize = 2;
pub const DIVIDEND_YIELD: usize = 3;
pub const MATURITY: usize = 4;
pub const IS_CALL: usize = 5;
pub const FIRST_LAG: usize = 6;

/// Column names of the feature encoding, in order.
pub fn feature_names() -> Vec<String> {
    let mut names: Vec<String> = [
        "strike",
        "underlying_price",
        "rate",
        "dividend_yield",
        "maturity_years",
        "is_call",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    names.extend((1..=N_LAGS).map(|i| format!("lag_{i}")));
    names
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("{field}: {reason}")]
    InvalidField { field: &'static str, reason: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid split: {0}")]
    InvalidSplit(String),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> DataError {
    DataError::InvalidField {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OptionType {
    Call,
    Put,
}

impl OptionType {
    /// Binary encoding: Call → 1, Put → 0.
    pub fn flag(self) -> f64 {
        match self {
            OptionType::Call => 1.0,
            OptionType::Put => 0.0,
        }
    }

    pub fn from_flag(flag: f64) -> Option<Self> {
        if flag == 1.0 {
            Some(OptionType::Call)
        } else if flag == 0.0 {
            Some(OptionType::Put)
        } else {
            None
        }
    }

    /// Single-letter CSV code.
    pub fn code(self) -> &'static str {
        match self {
            OptionType::Call => "C",
            OptionType::Put => "P",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "C" => Some(OptionType::Call),
            "P" => Some(OptionType::Put),
            _ => None,
        }
    }
}

impl fmt::Display for OptionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// One market observation of a European option.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionQuote {
    pub underlying_price: f64,
    pub strike: f64,
    pub maturity_years: f64,
    pub rate: f64,
    pub dividend_yield: f64,
    pub implied_vol: Option<f64>,
    pub option_type: OptionType,
    /// Past closes, most recent first.
    pub lags: Vec<f64>,
    /// Bid-ask midpoint, the prediction target.
    pub midpoint: f64,
}

impl OptionQuote {
    /// Checks every quote invariant, reporting the first offending field.
    pub fn validate(&self) -> Result<(), DataError> {
        let positive = |field: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(field, format!("must be positive and finite, got {v}")))
            }
        };
        positive("underlying_price", self.underlying_price)?;
        positive("strike", self.strike)?;
        positive("maturity_years", self.maturity_years)?;
        if !self.rate.is_finite() {
            return Err(invalid("rate", "must be finite"));
        }
        if !self.dividend_yield.is_finite() {
            return Err(invalid("dividend_yield", "must be finite"));
        }
        if !(self.midpoint.is_finite() && self.midpoint > 0.0 && self.midpoint < MAX_MIDPOINT) {
            return Err(invalid(
                "midpoint",
                format!("must lie in (0, {MAX_MIDPOINT}), got {}", self.midpoint),
            ));
        }
        if self.lags.len() != N_LAGS {
            return Err(invalid(
                "lags",
                format!("expected {N_LAGS}, got {}", self.lags.len()),
            ));
        }
        if let Some((i, v)) = self
            .lags
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(invalid("lags", format!("lag_{} must be positive, got {v}", i + 1)));
        }
        if let Some(iv) = self.implied_vol {
            if !(iv.is_finite() && iv > 0.0 && iv <= MAX_IMPLIED_VOL) {
                return Err(invalid(
                    "implied_vol",
                    format!("must lie in (0, {MAX_IMPLIED_VOL}], got {iv}"),
                ));
            }
        }
        Ok(())
    }
}

/// The 26-value model input. Never contains implied volatility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureRow([f64; N_FEATURES]);

impl FeatureRow {
    pub fn from_values(values: [f64; N_FEATURES]) -> Result<Self, DataError> {
        if OptionType::from_flag(values[IS_CALL]).is_none() {
            return Err(invalid("is_call", format!("expected 0 or 1, got {}", values[IS_CALL])));
        }
        Ok(FeatureRow(values))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self, DataError> {
        let arr: [f64; N_FEATURES] = values.try_into().map_err(|_| {
            invalid(
                "features",
                format!("expected {N_FEATURES} values, got {}", values.len()),
            )
        })?;
        Self::from_values(arr)
    }

    pub fn values(&self) -> &[f64; N_FEATURES] {
        &self.0
    }

    pub fn strike(&self) -> f64 {
        self.0[STRIKE]
    }

    pub fn underlying_price(&self) -> f64 {
        self.0[UNDERLYING]
    }

    pub fn rate(&self) -> f64 {
        self.0[RATE]
    }

    pub fn dividend_yield(&self) -> f64 {
        self.0[DIVIDEND_YIELD]
    }

    pub fn maturity_years(&self) -> f64 {
        self.0[MATURITY]
    }

    pub fn option_type(&self) -> OptionType {
        // from_values guarantees the flag is binary
        OptionType::from_flag(self.0[IS_CALL]).unwrap_or(OptionType::Put)
    }

    pub fn lags(&self) -> &[f64] {
        &self.0[FIRST_LAG..]
    }
}

/// Encodes a quote as `[strike, underlying, rate, yield, maturity, is_call, lag_1..lag_20]`.
pub fn encode_features(quote: &OptionQuote) -> Result<FeatureRow, DataError> {
    quote.validate()?;
    let mut values = [0.0; N_FEATURES];
    values[STRIKE] = quote.strike;
    values[UNDERLYING] = quote.underlying_price;
    values[RATE] = quote.rate;
    values[DIVIDEND_YIELD] = quote.dividend_yield;
    values[MATURITY] = quote.maturity_years;
    values[IS_CALL] = quote.option_type.flag();
    values[FIRST_LAG..].copy_from_slice(&quote.lags);
    Ok(FeatureRow(values))
}

/// Per-field tally of quotes rejected by [`filter_quotes`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DropCounts {
    pub by_field: BTreeMap<&'static str, usize>,
}

impl DropCounts {
    pub fn total(&self) -> usize {
        self.by_field.values().sum()
    }
}

/// Keeps the quotes that satisfy every [`OptionQuote`] invariant.
pub fn filter_quotes(quotes: Vec<OptionQuote>) -> (Vec<OptionQuote>, DropCounts) {
    let mut dropped = DropCounts::default();
    let kept = quotes
        .into_iter()
        .filter(|q| match q.validate() {
            Ok(()) => true,
            Err(DataError::InvalidField { field, .. }) => {
                *dropped.by_field.entry(field).or_default() += 1;
                false
            }
            Err(_) => false,
        })
        .collect();
    (kept, dropped)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Synthetic,
    Ingested,
}

/// One encoded observation. `implied_vol` rides along for the Black-Scholes
/// baseline only; it is never part of the features.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: u64,
    pub features: FeatureRow,
    pub target: f64,
    pub implied_vol: Option<f64>,
}

impl Sample {
    /// Rebuilds the quote this sample was encoded from.
    pub fn to_quote(&self) -> OptionQuote {
        let f = &self.features;
        OptionQuote {
            underlying_price: f.underlying_price(),
            strike: f.strike(),
            maturity_years: f.maturity_years(),
            rate: f.rate(),
            dividend_yield: f.dividend_yield(),
            implied_vol: self.implied_vol,
            option_type: f.option_type(),
            lags: f.lags().to_vec(),
            midpoint: self.target,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub provenance: Provenance,
}

impl Dataset {
    /// Encodes quotes, assigning sequential row identifiers from 0.
    pub fn from_quotes(quotes: &[OptionQuote], provenance: Provenance) -> Result<Self, DataError> {
        let samples = quotes
            .iter()
            .enumerate()
            .map(|(i, q)| {
                Ok(Sample {
                    id: i as u64,
                    features: encode_features(q)?,
                    target: q.midpoint,
                    implied_vol: q.implied_vol,
                })
            })
            .collect::<Result<Vec<_>, DataError>>()?;
        Ok(Dataset {
            samples,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn quotes(&self) -> Vec<OptionQuote> {
        self.samples.iter().map(Sample::to_quote).collect()
    }

    /// Row-major `n × 26` feature matrix.
    pub fn feature_matrix(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.len(), N_FEATURES));
        for (mut row, s) in m.rows_mut().into_iter().zip(&self.samples) {
            for (dst, src) in row.iter_mut().zip(s.features.values()) {
                *dst = *src;
            }
        }
        m
    }

    pub fn targets(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.target).collect()
    }

    /// SHA-256 over the exact bit patterns of every feature, target and
    /// implied vol, in row order.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.len() as u64).to_le_bytes());
        for s in &self.samples {
            for v in s.features.values() {
                h.update(v.to_bits().to_le_bytes());
            }
            h.update(s.target.to_bits().to_le_bytes());
            match s.implied_vol {
                Some(iv) => {
                    h.update([1u8]);
                    h.update(iv.to_bits().to_le_bytes());
                }
                None => h.update([0u8]),
            }
        }
        hex_digest(&h.finalize())
    }
}

/// Feature matrix with aligned targets, the training input of both learners.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeled {
    pub x: Array2<f64>,
    pub y: Vec<f64>,
}

impl Labeled {
    pub fn new(x: Array2<f64>, y: Vec<f64>) -> Self {
        assert_eq!(x.nrows(), y.len(), "rows and targets must align");
        Labeled { x, y }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

impl From<&Dataset> for Labeled {
    fn from(ds: &Dataset) -> Self {
        Labeled {
            x: ds.feature_matrix(),
            y: ds.targets(),
        }
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMethod {
    /// Seeded uniform shuffle before slicing.
    #[default]
    Random,
    /// Slices in file order, so a time-ordered file splits chronologically.
    Sequential,
}

impl std::str::FromStr for SplitMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "random" => Ok(SplitMethod::Random),
            "sequential" => Ok(SplitMethod::Sequential),
            _ => Err(format!("unknown split method {s:?} (random, sequential)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub method: SplitMethod,
    /// Unused by [`SplitMethod::Sequential`].
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.98,
            val_fraction: 0.01,
            test_fraction: 0.01,
            method: SplitMethod::Random,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        let fr = [self.train_fraction, self.val_fraction, self.test_fraction];
        if fr.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(DataError::InvalidSplit("fractions must be positive".into()));
        }
        if (fr.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(DataError::InvalidSplit("fractions must sum to 1".into()));
        }
        Ok(())
    }

    /// Partition sizes `(train, val, test)` for `n` rows; rounding remainder goes to train.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let val = ((n as f64) * self.val_fraction).round() as usize;
        let val = val.min(n);
        let test = (((n as f64) * self.test_fraction).round() as usize).min(n - val);
        (n - val - test, val, test)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

/// Contiguous train/val/test slices, taken after a seeded uniform shuffle
/// unless the spec asks for file order.
pub fn split_dataset(ds: &Dataset, spec: &SplitSpec) -> Result<DatasetSplit, DataError> {
    spec.validate()?;
    if ds.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let n = ds.len();
    let mut order: Vec<usize> = (0..n).collect();
    if spec.method == SplitMethod::Random {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    }

    let (n_train, n_val, _) = spec.sizes(n);
    let take = |idx: &[usize]| Dataset {
        samples: idx.iter().map(|&i| ds.samples[i].clone()).collect(),
        provenance: ds.provenance,
    };
    Ok(DatasetSplit {
        train: take(&order[..n_train]),
        val: take(&order[n_train..n_train + n_val]),
        test: take(&order[n_train + n_val..]),
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    pub(crate) fn quote(option_type: OptionType) -> OptionQuote {
        OptionQuote {
            underlying_price: 100.0,
            strike: 90.0,
            maturity_years: 0.5,
            rate: 0.02,
            dividend_yield: 0.01,
            implied_vol: Some(0.25),
            option_type,
            lags: vec![100.0; N_LAGS],
            midpoint: 12.5,
        }
    }

    fn dataset(n: usize) -> Dataset {
        let quotes: Vec<_> = (0..n)
            .map(|i| OptionQuote {
                strike: 50.0 + i as f64,
                ..quote(OptionType::Call)
            })
            .collect();
        Dataset::from_quotes(&quotes, Provenance::Synthetic).unwrap()
    }

    #[test]
    fn encodes_call_in_fixed_order() {
        let row = encode_features(&quote(OptionType::Call)).unwrap();
        let mut expected = vec![90.0, 100.0, 0.02, 0.01, 0.5, 1.0];
        expected.extend([100.0; 20]);
        assert_eq!(row.values().as_slice(), expected.as_slice());
    }

    #[test]
    fn put_only_flips_flag() {
        let c = encode_features(&quote(OptionType::Call)).unwrap();
        let p = encode_features(&quote(OptionType::Put)).unwrap();
        assert_eq!(p.values()[IS_CALL], 0.0);
        for i in (0..N_FEATURES).filter(|&i| i != IS_CALL) {
            assert_eq!(c.values()[i], p.values()[i]);
        }
    }

    #[test]
    fn short_lags_rejected() {
        let mut q = quote(OptionType::Call);
        q.lags.pop();
        let err = encode_features(&q).unwrap_err();
        assert_eq!(err.to_string(), "lags: expected 20, got 19");
    }

    #[test]
    fn midpoint_bound_is_strict() {
        let mut q = quote(OptionType::Call);
        q.midpoint = 100_000.0;
        let (kept, dropped) = filter_quotes(vec![q.clone()]);
        assert!(kept.is_empty());
        assert_eq!(dropped.total(), 1);
        assert_eq!(dropped.by_field["midpoint"], 1);

        q.midpoint = 0.015;
        let (kept, dropped) = filter_quotes(vec![q]);
        assert_eq!(kept.len(), 1);
        assert_eq!(dropped.total(), 0);
    }

    #[test]
    fn filter_empty() {
        let (kept, dropped) = filter_quotes(vec![]);
        assert!(kept.is_empty());
        assert_eq!(dropped.total(), 0);
    }

    #[test]
    fn split_sizes_default() {
        let ds = dataset(1000);
        let s = split_dataset(&ds, &SplitSpec::default()).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (980, 10, 10));
    }

    #[test]
    fn split_is_deterministic() {
        let ds = dataset(300);
        let spec = SplitSpec {
            seed: 7,
            ..SplitSpec::default()
        };
        assert_eq!(split_dataset(&ds, &spec).unwrap(), split_dataset(&ds, &spec).unwrap());
    }

    #[test]
    fn split_rejects_bad_fractions() {
        let spec = SplitSpec {
            train_fraction: 0.5,
            val_fraction: 0.5,
            test_fraction: 0.1,
            ..SplitSpec::default()
        };
        let err = split_dataset(&dataset(10), &spec).unwrap_err();
        assert!(err.to_string().contains("fractions must sum to 1"));
    }

    #[test]
    fn sequential_split_keeps_file_order() {
        let ds = dataset(100);
        let spec = SplitSpec {
            train_fraction: 0.8,
            val_fraction: 0.1,
            test_fraction: 0.1,
            method: SplitMethod::Sequential,
            seed: 0,
        };
        let s = split_dataset(&ds, &spec).unwrap();
        assert_eq!(s.train.samples, ds.samples[..80]);
        assert_eq!(s.val.samples, ds.samples[80..90]);
        assert_eq!(s.test.samples, ds.samples[90..]);
        assert_eq!("sequential".parse(), Ok(SplitMethod::Sequential));
        assert!("weekly".parse::<SplitMethod>().is_err());
    }

    #[test]
    fn split_rejects_empty() {
        let ds = Dataset {
            samples: vec![],
            provenance: Provenance::Ingested,
        };
        assert_eq!(
            split_dataset(&ds, &SplitSpec::default()).unwrap_err(),
            DataError::EmptyDataset
        );
    }

    #[test]
    fn sample_round_trips_to_quote() {
        let q = quote(OptionType::Put);
        let ds = Dataset::from_quotes(std::slice::from_ref(&q), Provenance::Ingested).unwrap();
        assert_eq!(ds.samples[0].to_quote(), q);
    }

    fn arb_quote() -> impl Strategy<Value = OptionQuote> {
        (
            (1.0..5000.0f64, 1.0..5000.0f64, 0.01..3.0f64),
            (-0.05..0.1f64, 0.0..0.1f64, any::<bool>()),
            (prop::collection::vec(1.0..5000.0f64, N_LAGS), 0.01..2000.0f64),
        )
            .prop_map(|((s, k, t), (r, q, call), (lags, mid))| OptionQuote {
                underlying_price: s,
                strike: k,
                maturity_years: t,
                rate: r,
                dividend_yield: q,
                implied_vol: None,
                option_type: if call { OptionType::Call } else { OptionType::Put },
                lags,
                midpoint: mid,
            })
    }

    proptest! {
        #[test]
        fn encoding_has_fixed_arity_and_is_injective(a in arb_quote(), b in arb_quote()) {
            let ea = encode_features(&a).unwrap();
            let eb = encode_features(&b).unwrap();
            prop_assert_eq!(ea.values().len(), N_FEATURES);
            let same_fields = a.strike == b.strike
                && a.underlying_price == b.underlying_price
                && a.rate == b.rate
                && a.dividend_yield == b.dividend_yield
                && a.maturity_years == b.maturity_years
                && a.option_type == b.option_type
                && a.lags == b.lags;
            prop_assert_eq!(ea == eb, same_fields);
        }

        #[test]
        fn filter_is_idempotent(quotes in prop::collection::vec(arb_quote().prop_map(|mut q| {
            // push some quotes out of bounds
            if q.midpoint > 1500.0 { q.midpoint = 150_000.0; }
            if q.strike < 10.0 { q.strike = -q.strike; }
            q
        }), 0..40)) {
            let (once, _) = filter_quotes(quotes);
            let (twice, dropped) = filter_quotes(once.clone());
            prop_assert_eq!(once, twice);
            prop_assert_eq!(dropped.total(), 0);
        }

        #[test]
        fn split_partitions_rows(n in 1usize..500, seed in any::<u64>()) {
            let ds = dataset(n);
            let spec = SplitSpec { seed, ..SplitSpec::default() };
            let s = split_dataset(&ds, &spec).unwrap();
            prop_assert_eq!(s.train.len() + s.val.len() + s.test.len(), n);
            let ids: HashSet<u64> = s.train.samples.iter()
                .chain(&s.val.samples)
                .chain(&s.test.samples)
                .map(|r| r.id)
                .collect();
            prop_assert_eq!(ids.len(), n);
        }
    }
}
