//! Synthetic European option chains.
//!
//! Each underlying follows a discrete geometric Brownian motion with a
//! volatility drawn once from a weighted set of regimes. Every trading day
//! with 20 prior closes produces a chain over the configured maturities and
//! moneyness ratios, priced by Black-Scholes and perturbed by multiplicative
//! bid-ask noise. Randomness for underlying `i` comes from ChaCha streams
//! keyed by `(seed, i)`, so serial and parallel generation agree exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blackscholes::{bs_price, BsInputs};
use crate::dataset::{OptionQuote, OptionType, N_LAGS};

pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;
pub const DT: f64 = 1.0 / TRADING_DAYS_PER_YEAR;
/// Floor applied to noisy midpoints; model prices below it are not quoted.
pub const MIN_QUOTE: f64 = 0.005;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("realized vol undefined: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolRegime {
    pub sigma: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_underlyings: usize,
    pub days_per_underlying: usize,
    pub s0_range: (f64, f64),
    pub vol_regimes: Vec<VolRegime>,
    pub drift: f64,
    pub rate_range: (f64, f64),
    pub yield_range: (f64, f64),
    pub maturities: Vec<f64>,
    pub moneyness_grid: Vec<f64>,
    pub half_spread: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_underlyings: 18,
            days_per_underlying: 100,
            s0_range: (20.0, 2500.0),
            vol_regimes: vec![
                VolRegime { sigma: 0.15, weight: 0.3 },
                VolRegime { sigma: 0.25, weight: 0.3 },
                VolRegime { sigma: 0.4, weight: 0.25 },
                VolRegime { sigma: 0.7, weight: 0.15 },
            ],
            drift: 0.05,
            rate_range: (0.005, 0.06),
            yield_range: (0.005, 0.04),
            maturities: vec![0.1, 0.25, 0.5, 1.0, 2.0],
            moneyness_grid: vec![0.8, 0.9, 0.95, 1.0, 1.05, 1.1, 1.2],
            half_spread: 0.01,
            seed: 42,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if self.days_per_underlying < N_LAGS + 1 {
            return bad(format!(
                "days_per_underlying must be at least {}, got {}",
                N_LAGS + 1,
                self.days_per_underlying
            ));
        }
        let (lo, hi) = self.s0_range;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return bad(format!("s0_range must satisfy 0 < lo < hi, got ({lo}, {hi})"));
        }
        for (name, (lo, hi)) in [("rate_range", self.rate_range), ("yield_range", self.yield_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi && lo > -1.0 && hi < 1.0) {
                return bad(format!("{name} must be a non-empty interval inside (-1, 1), got ({lo}, {hi})"));
            }
        }
        if self.vol_regimes.is_empty() {
            return bad("vol_regimes must not be empty".into());
        }
        if self
            .vol_regimes
            .iter()
            .any(|r| !(r.sigma >= 0.0 && r.sigma <= 3.0 && r.weight > 0.0))
        {
            return bad("each regime needs sigma in [0, 3] and a positive weight".into());
        }
        let total: f64 = self.vol_regimes.iter().map(|r| r.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("regime weights must sum to 1, got {total}"));
        }
        if !self.drift.is_finite() {
            return bad("drift must be finite".into());
        }
        if self.maturities.is_empty() || self.maturities.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return bad("maturities must be non-empty and positive".into());
        }
        if self.moneyness_grid.is_empty() || self.moneyness_grid.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return bad("moneyness_grid must be non-empty and positive".into());
        }
        if !(0.0..=0.1).contains(&self.half_spread) {
            return bad(format!("half_spread must lie in [0, 0.1], got {}", self.half_spread));
        }
        Ok(())
    }
}

/// One simulated underlying: daily closes plus the constants drawn for it.
#[derive(Debug, Clone, PartialEq)]
pub struct UnderlyingPath {
    pub index: usize,
    pub sigma: f64,
    pub rate: f64,
    pub dividend_yield: f64,
    pub closes: Vec<f64>,
}

fn stream(seed: u64, index: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * index as u64 + purpose);
    rng
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn draw_regime(rng: &mut ChaCha8Rng, regimes: &[VolRegime]) -> f64 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for r in regimes {
        acc += r.weight;
        if u < acc {
            return r.sigma;
        }
    }
    regimes[regimes.len() - 1].sigma
}

/// Simulates `S_{t+1} = S_t exp((μ - σ²/2)Δt + σ√Δt Z)` for one underlying.
pub fn simulate_underlying(cfg: &SimConfig, index: usize) -> UnderlyingPath {
    let mut rng = stream(cfg.seed, index, 0);
    let s0 = uniform(&mut rng, cfg.s0_range);
    let sigma = draw_regime(&mut rng, &cfg.vol_regimes);
    let rate = uniform(&mut rng, cfg.rate_range);
    let dividend_yield = uniform(&mut rng, cfg.yield_range);

    let drift = (cfg.drift - 0.5 * sigma * sigma) * DT;
    let diffusion = sigma * DT.sqrt();
    let mut closes = Vec::with_capacity(cfg.days_per_underlying);
    let mut s = s0;
    closes.push(s);
    for _ in 1..cfg.days_per_underlying {
        let z: f64 = rng.sample(StandardNormal);
        s *= (drift + diffusion * z).exp();
        closes.push(s);
    }
    UnderlyingPath {
        index,
        sigma,
        rate,
        dividend_yield,
        closes,
    }
}

/// Builds every quote the path supports: one per eligible day, maturity,
/// moneyness and option type. Quotes failing validation are discarded.
pub fn generate_chain(path: &UnderlyingPath, cfg: &SimConfig) -> Vec<OptionQuote> {
    let mut rng = stream(cfg.seed, path.index, 1);
    let mut quotes = Vec::new();
    for day in N_LAGS..path.closes.len() {
        let spot = path.closes[day];
        let lags: Vec<f64> = path.closes[day - N_LAGS..day].iter().rev().copied().collect();
        for &maturity in &cfg.maturities {
            for &m in &cfg.moneyness_grid {
                for option_type in [OptionType::Call, OptionType::Put] {
                    // draw unconditionally so the noise stream does not depend on discards
                    let u = cfg.half_spread * (2.0 * rng.random::<f64>() - 1.0);
                    let inputs = BsInputs {
                        spot,
                        strike: m * spot,
                        maturity,
                        rate: path.rate,
                        dividend_yield: path.dividend_yield,
                        sigma: path.sigma,
                        option_type,
                    };
                    let Ok(price) = bs_price(&inputs) else { continue };
                    if price < MIN_QUOTE {
                        continue;
                    }
                    let midpoint = if cfg.half_spread == 0.0 {
                        price
                    } else {
                        (price * (1.0 + u)).max(MIN_QUOTE)
                    };
                    let quote = OptionQuote {
                        underlying_price: spot,
                        strike: inputs.strike,
                        maturity_years: maturity,
                        rate: path.rate,
                        dividend_yield: path.dividend_yield,
                        implied_vol: Some(path.sigma),
                        option_type,
                        lags: lags.clone(),
                        midpoint,
                    };
                    if quote.validate().is_ok() {
                        quotes.push(quote);
                    }
                }
            }
        }
    }
    quotes
}

/// Generates the full dataset, underlyings in index order.
pub fn generate_dataset(cfg: &SimConfig) -> Result<Vec<OptionQuote>, SimError> {
    cfg.validate()?;
    let chains: Vec<Vec<OptionQuote>> = (0..cfg.n_underlyings)
        .into_par_iter()
        .map(|i| generate_chain(&simulate_underlying(cfg, i), cfg))
        .collect();
    Ok(chains.into_iter().flatten().collect())
}

/// Annualized sample standard deviation of the 19 log returns between 20 closes.
pub fn realized_vol(lags: &[f64]) -> Result<f64, SimError> {
    if lags.len() != N_LAGS {
        return Err(SimError::Domain(format!("expected {N_LAGS} lags, got {}", lags.len())));
    }
    if let Some(bad) = lags.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(SimError::Domain(format!("lags must be positive, got {bad}")));
    }
    let returns: Vec<f64> = lags.windows(2).map(|w| (w[0] / w[1]).ln()).collect();
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((TRADING_DAYS_PER_YEAR * var).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::filter_quotes;

    fn small() -> SimConfig {
        SimConfig {
            n_underlyings: 3,
            days_per_underlying: 30,
            ..SimConfig::default()
        }
    }

    #[test]
    fn zero_vol_path_is_exponential() {
        let cfg = SimConfig {
            vol_regimes: vec![VolRegime { sigma: 0.0, weight: 1.0 }],
            drift: 0.08,
            ..small()
        };
        let path = simulate_underlying(&cfg, 1);
        let s0 = path.closes[0];
        for (t, s) in path.closes.iter().enumerate() {
            let want = s0 * (cfg.drift * t as f64 * DT).exp();
            assert!((s / want - 1.0).abs() < 1e-13, "t={t}");
        }
    }

    #[test]
    fn paths_are_deterministic() {
        let cfg = small();
        assert_eq!(simulate_underlying(&cfg, 2), simulate_underlying(&cfg, 2));
        assert_ne!(simulate_underlying(&cfg, 2).closes, simulate_underlying(&cfg, 1).closes);
    }

    #[test]
    fn log_return_mean_matches_gbm_moment() {
        let sigma = 0.3;
        let cfg = SimConfig {
            n_underlyings: 10_000,
            days_per_underlying: 21,
            drift: 0.0,
            vol_regimes: vec![VolRegime { sigma, weight: 1.0 }],
            ..SimConfig::default()
        };
        let samples: Vec<f64> = (0..cfg.n_underlyings)
            .map(|i| {
                let p = simulate_underlying(&cfg, i);
                (p.closes[20] / p.closes[0]).ln()
            })
            .collect();
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        let want = -0.5 * sigma * sigma * 20.0 / 252.0;
        assert!((mean - want).abs() <= 3.0 * se, "mean {mean}, want {want} ± {}", 3.0 * se);
    }

    #[test]
    fn noiseless_midpoint_is_model_price() {
        let cfg = SimConfig {
            half_spread: 0.0,
            ..small()
        };
        let path = simulate_underlying(&cfg, 0);
        for q in generate_chain(&path, &cfg) {
            let p = bs_price(&BsInputs {
                spot: q.underlying_price,
                strike: q.strike,
                maturity: q.maturity_years,
                rate: q.rate,
                dividend_yield: q.dividend_yield,
                sigma: q.implied_vol.unwrap(),
                option_type: q.option_type,
            })
            .unwrap();
            assert_eq!(q.midpoint, p);
        }
    }

    #[test]
    fn single_grid_point_gives_two_quotes_per_day() {
        let cfg = SimConfig {
            maturities: vec![1.0],
            moneyness_grid: vec![1.0],
            ..small()
        };
        let path = simulate_underlying(&cfg, 0);
        let chain = generate_chain(&path, &cfg);
        assert_eq!(chain.len(), 2 * (cfg.days_per_underlying - N_LAGS));
    }

    #[test]
    fn lags_are_previous_closes_most_recent_first() {
        let cfg = SimConfig {
            maturities: vec![1.0],
            moneyness_grid: vec![1.0],
            ..small()
        };
        let path = simulate_underlying(&cfg, 0);
        let chain = generate_chain(&path, &cfg);
        let first = &chain[0];
        assert_eq!(first.underlying_price, path.closes[20]);
        assert_eq!(first.lags[0], path.closes[19]);
        assert_eq!(first.lags[19], path.closes[0]);
    }

    #[test]
    fn default_config_output_passes_filter() {
        let cfg = SimConfig {
            n_underlyings: 6,
            ..SimConfig::default()
        };
        let quotes = generate_dataset(&cfg).unwrap();
        assert!(!quotes.is_empty());
        let n = quotes.len();
        let (kept, dropped) = filter_quotes(quotes);
        assert_eq!(dropped.total(), 0);
        assert_eq!(kept.len(), n);
    }

    #[test]
    fn parallel_matches_serial() {
        let cfg = small();
        let serial: Vec<_> = (0..cfg.n_underlyings)
            .flat_map(|i| generate_chain(&simulate_underlying(&cfg, i), &cfg))
            .collect();
        assert_eq!(generate_dataset(&cfg).unwrap(), serial);
    }

    #[test]
    fn rejects_bad_config() {
        for cfg in [
            SimConfig { days_per_underlying: 20, ..small() },
            SimConfig { half_spread: 0.2, ..small() },
            SimConfig { s0_range: (10.0, 10.0), ..small() },
            SimConfig { vol_regimes: vec![VolRegime { sigma: 0.2, weight: 0.5 }], ..small() },
        ] {
            assert!(generate_dataset(&cfg).is_err());
        }
    }

    #[test]
    fn realized_vol_examples() {
        assert_eq!(realized_vol(&[100.0; 20]).unwrap(), 0.0);

        let up = 100.0 * 0.01f64.exp();
        let lags: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 100.0 } else { up }).collect();
        // 19 returns: ten of -0.01 and nine of +0.01 (or vice versa)
        let r: Vec<f64> = (0..19).map(|i| if i % 2 == 0 { -0.01 } else { 0.01 }).collect();
        let mean = r.iter().sum::<f64>() / 19.0;
        let var = r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 18.0;
        let want = (252.0 * var).sqrt();
        let got = realized_vol(&lags).unwrap();
        assert!((got - want).abs() < 1e-12);
        assert!((got - 0.162_869_014_209_191_07).abs() < 1e-12);

        let mut zero = vec![100.0; 20];
        zero[7] = 0.0;
        assert!(realized_vol(&zero).is_err());
    }
}
