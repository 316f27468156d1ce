//! Closed-form European option pricing with a continuous dividend yield.
//!
//! ```text
//! d1 = [ln(S/K) + (r - q + σ²/2)T] / (σ√T)      d2 = d1 - σ√T
//! C  = S e^{-qT} N(d1) - K e^{-rT} N(d2)
//! P  = K e^{-rT} N(-d2) - S e^{-qT} N(-d1)
//! ```

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use thiserror::Error;

use crate::dataset::{FeatureRow, OptionType};

/// σ√T below this is treated as a data problem rather than priced at the intrinsic limit.
pub const MIN_SIGMA_SQRT_T: f64 = 1e-12;
/// Search interval of the implied-volatility solver.
pub const IV_MIN: f64 = 1e-6;
pub const IV_MAX: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BsError {
    #[error("{field} out of domain: {value}")]
    InvalidInput { field: &'static str, value: f64 },
    #[error("degenerate volatility: sigma*sqrt(T) = {0:e}")]
    DegenerateVolatility(f64),
    #[error("no implied volatility solution: {0}")]
    NoSolution(String),
}

/// Standard normal CDF via `erfc`; absolute error well below 1e-15.
pub fn norm_cdf(x: f64) -> Result<f64, BsError> {
    if !x.is_finite() {
        return Err(BsError::InvalidInput { field: "x", value: x });
    }
    Ok(phi(x))
}

#[inline]
fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Contract terms without a volatility: the input to the implied-vol solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractTerms {
    pub spot: f64,
    pub strike: f64,
    pub maturity: f64,
    pub rate: f64,
    pub dividend_yield: f64,
    pub option_type: OptionType,
}

impl ContractTerms {
    pub fn from_features(row: &FeatureRow) -> Self {
        ContractTerms {
            spot: row.underlying_price(),
            strike: row.strike(),
            maturity: row.maturity_years(),
            rate: row.rate(),
            dividend_yield: row.dividend_yield(),
            option_type: row.option_type(),
        }
    }

    pub fn with_sigma(self, sigma: f64) -> BsInputs {
        BsInputs {
            spot: self.spot,
            strike: self.strike,
            maturity: self.maturity,
            rate: self.rate,
            dividend_yield: self.dividend_yield,
            sigma,
            option_type: self.option_type,
        }
    }

    fn discounted_spot(&self) -> f64 {
        self.spot * (-self.dividend_yield * self.maturity).exp()
    }

    fn discounted_strike(&self) -> f64 {
        self.strike * (-self.rate * self.maturity).exp()
    }

    /// No-arbitrage price interval `(intrinsic, upper)` for this contract.
    pub fn price_bounds(&self) -> (f64, f64) {
        let (s, k) = (self.discounted_spot(), self.discounted_strike());
        match self.option_type {
            OptionType::Call => ((s - k).max(0.0), s),
            OptionType::Put => ((k - s).max(0.0), k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsInputs {
    pub spot: f64,
    pub strike: f64,
    pub maturity: f64,
    pub rate: f64,
    pub dividend_yield: f64,
    pub sigma: f64,
    pub option_type: OptionType,
}

impl BsInputs {
    pub fn terms(&self) -> ContractTerms {
        ContractTerms {
            spot: self.spot,
            strike: self.strike,
            maturity: self.maturity,
            rate: self.rate,
            dividend_yield: self.dividend_yield,
            option_type: self.option_type,
        }
    }

    pub fn validate(&self) -> Result<(), BsError> {
        let checks: [(&'static str, f64, bool); 6] = [
            ("spot", self.spot, self.spot > 0.0),
            ("strike", self.strike, self.strike > 0.0),
            ("maturity", self.maturity, self.maturity > 0.0),
            ("sigma", self.sigma, self.sigma > 0.0),
            ("rate", self.rate, self.rate.abs() < 1.0),
            ("dividend_yield", self.dividend_yield, self.dividend_yield.abs() < 1.0),
        ];
        for (field, value, ok) in checks {
            if !(ok && value.is_finite()) {
                return Err(BsError::InvalidInput { field, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsIntermediates {
    pub d1: f64,
    pub d2: f64,
}

pub fn bs_intermediates(inputs: &BsInputs) -> Result<BsIntermediates, BsError> {
    inputs.validate()?;
    let sig_sqrt_t = inputs.sigma * inputs.maturity.sqrt();
    if sig_sqrt_t < MIN_SIGMA_SQRT_T {
        return Err(BsError::DegenerateVolatility(sig_sqrt_t));
    }
    let drift = inputs.rate - inputs.dividend_yield + 0.5 * inputs.sigma * inputs.sigma;
    let d1 = ((inputs.spot / inputs.strike).ln() + drift * inputs.maturity) / sig_sqrt_t;
    Ok(BsIntermediates {
        d1,
        d2: d1 - sig_sqrt_t,
    })
}

pub fn bs_price(inputs: &BsInputs) -> Result<f64, BsError> {
    let BsIntermediates { d1, d2 } = bs_intermediates(inputs)?;
    let terms = inputs.terms();
    let (s, k) = (terms.discounted_spot(), terms.discounted_strike());
    let price = match inputs.option_type {
        OptionType::Call => s * phi(d1) - k * phi(d2),
        OptionType::Put => k * phi(-d2) - s * phi(-d1),
    };
    Ok(price.max(0.0))
}

/// ∂price/∂σ, identical for calls and puts.
pub fn bs_vega(inputs: &BsInputs) -> Result<f64, BsError> {
    let BsIntermediates { d1, .. } = bs_intermediates(inputs)?;
    Ok(inputs.terms().discounted_spot() * norm_pdf(d1) * inputs.maturity.sqrt())
}

/// Inverts [`bs_price`] in σ over `[IV_MIN, IV_MAX]`.
///
/// Newton steps are taken while they stay inside the current bracket;
/// otherwise the bracket is bisected, so the solver always converges once
/// the price is attainable.
pub fn implied_vol(price: f64, terms: &ContractTerms) -> Result<f64, BsError> {
    terms.with_sigma(1.0).validate()?;
    let (lower, upper) = terms.price_bounds();
    if !(price.is_finite() && price > lower && price < upper) {
        return Err(BsError::NoSolution(format!(
            "price {price} outside no-arbitrage interval ({lower}, {upper})"
        )));
    }
    let tol = 1e-8 * price.max(1.0);
    let f = |sigma: f64| bs_price(&terms.with_sigma(sigma)).map(|p| p - price);

    let (mut lo, mut hi) = (IV_MIN, IV_MAX);
    let f_lo = f(lo)?;
    if f_lo >= 0.0 {
        return if f_lo <= tol {
            Ok(lo)
        } else {
            Err(BsError::NoSolution(format!("price {price} below the minimum-vol price")))
        };
    }
    let f_hi = f(hi)?;
    if f_hi <= 0.0 {
        return if -f_hi <= tol {
            Ok(hi)
        } else {
            Err(BsError::NoSolution(format!("price {price} above the maximum-vol price")))
        };
    }

    // Manaster-Koehler starting point
    let moneyness = (terms.spot / terms.strike).ln() + (terms.rate - terms.dividend_yield) * terms.maturity;
    let mut sigma = (2.0 * moneyness.abs() / terms.maturity).sqrt();
    if !(sigma > 0.05 && sigma < 2.0) {
        sigma = 0.3;
    }

    let mut best = (f64::INFINITY, sigma);
    for _ in 0..200 {
        let fx = f(sigma)?;
        if fx.abs() < best.0 {
            best = (fx.abs(), sigma);
        }
        if fx.abs() <= 1e-14 * price.max(1.0) {
            break;
        }
        if fx > 0.0 {
            hi = sigma;
        } else {
            lo = sigma;
        }
        let vega = bs_vega(&terms.with_sigma(sigma))?;
        let newton = sigma - fx / vega;
        let next = if vega > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - sigma).abs() <= 1e-15 * sigma || hi - lo <= 1e-15 {
            sigma = next;
            let fx = f(sigma)?;
            if fx.abs() < best.0 {
                best = (fx.abs(), sigma);
            }
            break;
        }
        sigma = next;
    }
    if best.0 <= tol {
        Ok(best.1)
    } else {
        Err(BsError::NoSolution(format!(
            "solver stalled with residual {:e}",
            best.0
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Marsaglia's series Φ(x) = ½ + φ(x)·Σ x^{2n+1}/(2n+1)!!; independent of erfc.
    fn phi_series(x: f64) -> f64 {
        let (mut term, mut sum) = (x, x);
        let mut n = 1.0;
        while term.abs() > 1e-30 * sum.abs().max(1e-300) {
            n += 2.0;
            term *= x * x / n;
            sum += term;
            if n > 2000.0 {
                break;
            }
        }
        0.5 + norm_pdf(x) * sum
    }

    fn atm() -> BsInputs {
        BsInputs {
            spot: 100.0,
            strike: 100.0,
            maturity: 1.0,
            rate: 0.0,
            dividend_yield: 0.0,
            sigma: 0.2,
            option_type: OptionType::Call,
        }
    }

    // 40-digit reference values.
    const PHI_TABLE: [(f64, f64); 6] = [
        (1.0, 0.841_344_746_068_542_948_585_232_545_632),
        (-1.0, 0.158_655_253_931_457_051_414_767_454_368),
        (2.5, 0.993_790_334_674_223_864_833_021_895_426),
        (0.3, 0.617_911_422_188_952_633_072_273_622_764),
        (-5.0, 2.866_515_718_791_939_116_737_523_328_746e-7),
        (-10.0, 7.619_853_024_160_526_065_973_343_251_599e-24),
    ];

    #[test]
    fn norm_cdf_reference_values() {
        assert_eq!(norm_cdf(0.0).unwrap(), 0.5);
        assert!((norm_cdf(40.0).unwrap() - 1.0).abs() <= 1e-15);
        for (x, want) in PHI_TABLE {
            let got = norm_cdf(x).unwrap();
            assert!((got - want).abs() <= 1e-12, "Φ({x}) = {got}, want {want}");
        }
        assert!((norm_cdf(1.0).unwrap() - 0.841_344_746).abs() < 1e-9);
    }

    #[test]
    fn norm_cdf_matches_series_oracle() {
        for i in -600..=600 {
            let x = i as f64 / 100.0;
            let got = norm_cdf(x).unwrap();
            let want = phi_series(x);
            assert!((got - want).abs() <= 1e-12, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn norm_cdf_symmetric_and_monotone() {
        let mut prev = 0.0;
        for i in -1000..=1000 {
            let x = i as f64 / 100.0;
            let p = norm_cdf(x).unwrap();
            assert!(p >= prev);
            prev = p;
            assert!((norm_cdf(-x).unwrap() - (1.0 - p)).abs() <= 1e-15);
        }
    }

    #[test]
    fn norm_cdf_rejects_non_finite() {
        assert!(norm_cdf(f64::NAN).is_err());
        assert!(norm_cdf(f64::INFINITY).is_err());
    }

    #[test]
    fn intermediates_examples() {
        let d = bs_intermediates(&atm()).unwrap();
        assert!((d.d1 - 0.1).abs() < 1e-15);
        assert!((d.d2 + 0.1).abs() < 1e-15);

        let deep = BsInputs {
            strike: 50.0,
            ..atm()
        };
        let d = bs_intermediates(&deep).unwrap();
        assert!((d.d1 - (2f64.ln() + 0.02) / 0.2).abs() < 1e-14);
        assert!((d.d1 - 3.565_735_902_799_726_5).abs() < 1e-14);
        assert_eq!(d.d2, d.d1 - 0.2);
    }

    #[test]
    fn tiny_sigma_is_degenerate() {
        let err = bs_intermediates(&BsInputs {
            sigma: 1e-14,
            ..atm()
        })
        .unwrap_err();
        assert!(matches!(err, BsError::DegenerateVolatility(_)));
        assert!(matches!(
            bs_price(&BsInputs { sigma: 1e-14, ..atm() }),
            Err(BsError::DegenerateVolatility(_))
        ));
    }

    #[test]
    fn invalid_inputs_rejected() {
        for bad in [
            BsInputs { spot: 0.0, ..atm() },
            BsInputs { strike: -1.0, ..atm() },
            BsInputs { maturity: 0.0, ..atm() },
            BsInputs { rate: 1.5, ..atm() },
            BsInputs { dividend_yield: f64::NAN, ..atm() },
        ] {
            assert!(matches!(bs_price(&bad), Err(BsError::InvalidInput { .. })));
        }
    }

    #[test]
    fn atm_benchmark() {
        let want = 100.0 * (2.0 * phi_series(0.1) - 1.0);
        let call = bs_price(&atm()).unwrap();
        assert!((call - 7.9656).abs() < 1e-4);
        assert!((call - want).abs() < 1e-12);
        assert!((call - 7.965_567_455_405_796).abs() < 1e-12);
        let put = bs_price(&BsInputs {
            option_type: OptionType::Put,
            ..atm()
        })
        .unwrap();
        assert!((call - put).abs() < 1e-12);
    }

    #[test]
    fn deep_itm_is_intrinsic() {
        let p = bs_price(&BsInputs {
            strike: 50.0,
            sigma: 0.05,
            maturity: 0.01,
            ..atm()
        })
        .unwrap();
        assert!((p - 50.0).abs() < 1e-6);
    }

    #[test]
    fn implied_vol_round_trip_example() {
        let terms = ContractTerms {
            spot: 100.0,
            strike: 110.0,
            maturity: 0.5,
            rate: 0.02,
            dividend_yield: 0.01,
            option_type: OptionType::Call,
        };
        let price = bs_price(&terms.with_sigma(0.37)).unwrap();
        let iv = implied_vol(price, &terms).unwrap();
        assert!((iv - 0.37).abs() < 1e-6);
        let again = bs_price(&terms.with_sigma(iv)).unwrap();
        assert!((again - price).abs() <= 1e-8 * price.max(1.0));
    }

    #[test]
    fn implied_vol_rejects_out_of_bounds_prices() {
        let terms = atm().terms();
        assert!(matches!(implied_vol(0.0, &terms), Err(BsError::NoSolution(_))));
        let upper = terms.price_bounds().1;
        assert!(matches!(implied_vol(upper, &terms), Err(BsError::NoSolution(_))));
        // attainable only with sigma > IV_MAX
        assert!(matches!(implied_vol(99.0, &terms), Err(BsError::NoSolution(_))));
    }

    fn arb_inputs() -> impl Strategy<Value = BsInputs> {
        (
            (1.0..5000.0f64, 0.2..5.0f64, 0.003..5.0f64),
            (-0.05..0.1f64, 0.0..0.15f64, 0.01..2.5f64, any::<bool>()),
        )
            .prop_map(|((s, m, t), (r, q, sigma, call))| BsInputs {
                spot: s,
                strike: s * m,
                maturity: t,
                rate: r,
                dividend_yield: q,
                sigma,
                option_type: if call { OptionType::Call } else { OptionType::Put },
            })
    }

    proptest! {
        #[test]
        fn parity_and_bounds(inp in arb_inputs()) {
            let c = bs_price(&BsInputs { option_type: OptionType::Call, ..inp }).unwrap();
            let p = bs_price(&BsInputs { option_type: OptionType::Put, ..inp }).unwrap();
            let terms = inp.terms();
            let (s, k) = (terms.discounted_spot(), terms.discounted_strike());
            prop_assert!(c >= 0.0 && p >= 0.0);
            prop_assert!(c <= s && p <= k);
            let tol = 1e-10 * 1f64.max(inp.spot).max(inp.strike);
            prop_assert!((c - p - (s - k)).abs() <= tol);
        }

        #[test]
        fn monotone_in_sigma_and_spot(inp in arb_inputs(), bump in 1.0001..1.5f64) {
            let base = bs_price(&inp).unwrap();
            let up_vol = bs_price(&BsInputs { sigma: inp.sigma * bump, ..inp }).unwrap();
            let up_spot = bs_price(&BsInputs { spot: inp.spot * bump, ..inp }).unwrap();
            let slack = 1e-12 * base.max(1.0);
            prop_assert!(up_vol >= base - slack);
            match inp.option_type {
                OptionType::Call => prop_assert!(up_spot >= base - slack),
                OptionType::Put => prop_assert!(up_spot <= base + slack),
            }
        }

        #[test]
        fn implied_vol_inverts_price(
            s in 20.0..500.0f64, m in 0.7..1.3f64, t in 0.1..2.0f64,
            r in -0.01..0.08f64, q in 0.0..0.05f64, sigma in 0.05..1.5f64, call in any::<bool>(),
        ) {
            let terms = ContractTerms {
                spot: s, strike: s * m, maturity: t, rate: r, dividend_yield: q,
                option_type: if call { OptionType::Call } else { OptionType::Put },
            };
            let price = bs_price(&terms.with_sigma(sigma)).unwrap();
            let vega = bs_vega(&terms.with_sigma(sigma)).unwrap();
            // σ is only identifiable where the price actually responds to it
            prop_assume!(vega > 1e-3 * price.max(1.0));
            let iv = implied_vol(price, &terms).unwrap();
            prop_assert!((iv - sigma).abs() <= 1e-6, "iv {} vs {}", iv, sigma);
        }
    }
}
