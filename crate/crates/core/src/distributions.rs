//! Valuation and competing-bid distributions.
//!
//! Only four valuation families are supported. Geometric valuations are
//! unnormalized (support `{1, 2, ...}`), so nothing downstream may assume
//! `v <= 1`.

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ValuationModel {
    /// Uniform on `[lo, hi)`.
    ContinuousUniform { lo: f64, hi: f64 },
    /// Uniform on the integers `{1, ..., max}`.
    DiscreteUniform { max: u32 },
    /// Number of trials up to and including the first success, support `{1, 2, ...}`.
    Geometric { p: f64 },
    Constant { value: f64 },
}

impl ValuationModel {
    pub fn continuous_uniform(lo: f64, hi: f64) -> Result<Self> {
        let m = ValuationModel::ContinuousUniform { lo, hi };
        m.validate()?;
        Ok(m)
    }

    pub fn discrete_uniform(max: u32) -> Result<Self> {
        let m = ValuationModel::DiscreteUniform { max };
        m.validate()?;
        Ok(m)
    }

    pub fn geometric(p: f64) -> Result<Self> {
        let m = ValuationModel::Geometric { p };
        m.validate()?;
        Ok(m)
    }

    pub fn constant(value: f64) -> Result<Self> {
        let m = ValuationModel::Constant { value };
        m.validate()?;
        Ok(m)
    }

    /// The default valuation distribution, uniform on `[0, 1)`.
    pub fn unit_uniform() -> Self {
        ValuationModel::ContinuousUniform { lo: 0.0, hi: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ValuationModel::ContinuousUniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi <= lo {
                    return Err(invalid(format!("continuous uniform needs 0 <= lo < hi, got [{lo}, {hi})")));
                }
            }
            ValuationModel::DiscreteUniform { max } => {
                if max == 0 {
                    return Err(invalid("discrete uniform needs max >= 1"));
                }
            }
            ValuationModel::Geometric { p } => {
                if !(p > 0.0 && p < 1.0) {
                    return Err(invalid(format!("geometric parameter must lie in (0, 1), got {p}")));
                }
            }
            ValuationModel::Constant { value } => {
                if !value.is_finite() || value < 0.0 {
                    return Err(invalid(format!("constant valuation must be finite and >= 0, got {value}")));
                }
            }
        }
        Ok(())
    }

    /// One draw. The model must have been validated.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ValuationModel::ContinuousUniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            ValuationModel::DiscreteUniform { max } => f64::from(rng.random_range(1..=max)),
            ValuationModel::Geometric { p } => {
                let failures = Geometric::new(p).expect("validated geometric parameter").sample(rng);
                failures as f64 + 1.0
            }
            ValuationModel::Constant { value } => value,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ValuationModel::ContinuousUniform { lo, hi } => 0.5 * (lo + hi),
            ValuationModel::DiscreteUniform { max } => 0.5 * (f64::from(max) + 1.0),
            ValuationModel::Geometric { p } => 1.0 / p,
            ValuationModel::Constant { value } => value,
        }
    }

    /// Right-continuous cumulative distribution function.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            ValuationModel::ContinuousUniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            ValuationModel::DiscreteUniform { max } => (x.floor() / f64::from(max)).clamp(0.0, 1.0),
            ValuationModel::Geometric { p } => {
                if x < 1.0 {
                    0.0
                } else {
                    1.0 - (1.0 - p).powf(x.floor())
                }
            }
            ValuationModel::Constant { value } => {
                if x >= value {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Smallest value in the support.
    pub fn support_min(&self) -> f64 {
        match *self {
            ValuationModel::ContinuousUniform { lo, .. } => lo,
            ValuationModel::DiscreteUniform { .. } | ValuationModel::Geometric { .. } => 1.0,
            ValuationModel::Constant { value } => value,
        }
    }

    /// Largest value in the support, `None` when unbounded.
    pub fn support_max(&self) -> Option<f64> {
        match *self {
            ValuationModel::ContinuousUniform { hi, .. } => Some(hi),
            ValuationModel::DiscreteUniform { max } => Some(f64::from(max)),
            ValuationModel::Geometric { .. } => None,
            ValuationModel::Constant { value } => Some(value),
        }
    }
}

/// The two highest competing bids an agent faces in one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompetingBids {
    /// gamma-th highest competing bid; the agent must beat it to win.
    pub hi: f64,
    /// (gamma+1)-th highest competing bid; the price when the agent loses
    /// without setting it.
    pub lo: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CompetingBidModel {
    /// Two i.i.d. draws from `marginal`, sorted. When the agent is not allowed
    /// to set the price, a single draw is used for both.
    IidPair { marginal: ValuationModel, price_setter_allowed: bool },
    /// Uniform resampling of observed `(hi, lo)` pairs.
    Empirical { pairs: Vec<[f64; 2]> },
}

impl CompetingBidModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            CompetingBidModel::IidPair { marginal, .. } => marginal.validate(),
            CompetingBidModel::Empirical { pairs } => {
                if pairs.is_empty() {
                    return Err(invalid("empirical competing-bid model needs at least one pair"));
                }
                for &[hi, lo] in pairs {
                    if !(hi.is_finite() && lo.is_finite()) || lo < 0.0 || lo > hi {
                        return Err(invalid(format!("competing bids must satisfy 0 <= lo <= hi, got ({hi}, {lo})")));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CompetingBids {
        match self {
            CompetingBidModel::IidPair { marginal, price_setter_allowed } => {
                let a = marginal.sample(rng);
                if *price_setter_allowed {
                    let b = marginal.sample(rng);
                    CompetingBids { hi: a.max(b), lo: a.min(b) }
                } else {
                    CompetingBids { hi: a, lo: a }
                }
            }
            CompetingBidModel::Empirical { pairs } => {
                let [hi, lo] = pairs[rng.random_range(0..pairs.len())];
                CompetingBids { hi, lo }
            }
        }
    }

    /// Expected value of the gamma-th competing bid.
    pub fn mean_hi(&self) -> f64 {
        match self {
            CompetingBidModel::IidPair { marginal, price_setter_allowed: false } => marginal.mean(),
            CompetingBidModel::IidPair { marginal, price_setter_allowed: true } => match *marginal {
                // E[max(U1, U2)] for uniform marginals
                ValuationModel::ContinuousUniform { lo, hi } => lo + 2.0 * (hi - lo) / 3.0,
                ValuationModel::Constant { value } => value,
                ValuationModel::DiscreteUniform { max } => {
                    let k = f64::from(max);
                    // E[max] = sum_{x=1}^{k} (1 - F(x-1)^2)
                    (0..max).map(|x| 1.0 - (f64::from(x) / k).powi(2)).sum()
                }
                ValuationModel::Geometric { p } => {
                    // max of two geometrics: 2/p - 1/(1 - (1-p)^2)
                    2.0 / p - 1.0 / (1.0 - (1.0 - p).powi(2))
                }
            },
            CompetingBidModel::Empirical { pairs } => pairs.iter().map(|p| p[0]).sum::<f64>() / pairs.len() as f64,
        }
    }

    /// Support bounds of the gamma-th competing bid, upper bound `None` when unbounded.
    pub fn support_hi(&self) -> (f64, Option<f64>) {
        match self {
            CompetingBidModel::IidPair { marginal, .. } => (marginal.support_min(), marginal.support_max()),
            CompetingBidModel::Empirical { pairs } => {
                let lo = pairs.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
                let hi = pairs.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
                (lo, Some(hi))
            }
        }
    }

    /// Lower bound of the (gamma+1)-th competing bid support.
    pub fn support_lo_min(&self) -> f64 {
        match self {
            CompetingBidModel::IidPair { marginal, .. } => marginal.support_min(),
            CompetingBidModel::Empirical { pairs } => pairs.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{RngContract, StreamPurpose};

    fn stream(seed: u64) -> crate::rng::RngStream {
        RngContract::new(seed).stream(0, 0, StreamPurpose::Custom(9))
    }

    /// Kolmogorov-Smirnov distance between the sample and the model CDF,
    /// evaluated at every jump of either function.
    fn ks_statistic(model: &ValuationModel, mut xs: Vec<f64>) -> f64 {
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = xs.len() as f64;
        let mut d: f64 = 0.0;
        let mut i = 0;
        while i < xs.len() {
            let x = xs[i];
            let mut j = i;
            while j < xs.len() && xs[j] == x {
                j += 1;
            }
            let f = model.cdf(x);
            let f_left = match model {
                ValuationModel::ContinuousUniform { .. } => f,
                _ => model.cdf(x - 1e-9),
            };
            d = d.max((j as f64 / n - f).abs()).max((i as f64 / n - f_left).abs());
            i = j;
        }
        d
    }

    #[test]
    fn constant_is_degenerate() {
        let m = ValuationModel::constant(0.7).unwrap();
        let mut r = stream(1);
        for _ in 0..10 {
            assert_eq!(m.sample(&mut r), 0.7);
        }
    }

    #[test]
    fn unit_uniform_support() {
        let m = ValuationModel::unit_uniform();
        let mut r = stream(2);
        for _ in 0..10_000 {
            let v = m.sample(&mut r);
            assert!((0.0..1.0).contains(&v));
        }
    }

    #[test]
    fn discrete_uniform_mean_law_of_large_numbers() {
        let m = ValuationModel::discrete_uniform(10).unwrap();
        let mut r = stream(3);
        let n = 1_000_000;
        let mean = (0..n).map(|_| m.sample(&mut r)).sum::<f64>() / n as f64;
        assert!((mean - 5.5).abs() < 0.01, "mean {mean}");
        assert_eq!(m.mean(), 5.5);
    }

    #[test]
    fn geometric_draws_are_positive_integers() {
        let m = ValuationModel::geometric(0.3).unwrap();
        let mut r = stream(4);
        for _ in 0..10_000 {
            let v = m.sample(&mut r);
            assert!(v >= 1.0 && v.fract() == 0.0);
        }
    }

    #[test]
    fn malformed_models_rejected_at_construction() {
        assert!(ValuationModel::continuous_uniform(1.0, 1.0).is_err());
        assert!(ValuationModel::continuous_uniform(2.0, 1.0).is_err());
        assert!(ValuationModel::geometric(0.0).is_err());
        assert!(ValuationModel::geometric(1.0).is_err());
        assert!(ValuationModel::discrete_uniform(0).is_err());
        assert!(ValuationModel::constant(-1.0).is_err());
    }

    #[test]
    fn empirical_cdf_matches_model_cdf() {
        let models = [
            ValuationModel::unit_uniform(),
            ValuationModel::continuous_uniform(0.0, 50.0).unwrap(),
            ValuationModel::discrete_uniform(10).unwrap(),
            ValuationModel::geometric(0.3).unwrap(),
            ValuationModel::constant(0.4).unwrap(),
        ];
        for (k, m) in models.iter().enumerate() {
            let mut r = stream(100 + k as u64);
            let xs: Vec<f64> = (0..100_000).map(|_| m.sample(&mut r)).collect();
            let d = ks_statistic(m, xs);
            assert!(d < 0.01, "{m:?}: KS = {d}");
        }
    }

    #[test]
    fn competing_pair_ordering() {
        let with = CompetingBidModel::IidPair { marginal: ValuationModel::unit_uniform(), price_setter_allowed: true };
        let without = CompetingBidModel::IidPair { marginal: ValuationModel::unit_uniform(), price_setter_allowed: false };
        let mut r = stream(5);
        for _ in 0..1000 {
            let a = with.sample(&mut r);
            assert!(a.lo <= a.hi);
            let b = without.sample(&mut r);
            assert_eq!(b.lo, b.hi);
        }
    }

    #[test]
    fn empirical_pairs_validated() {
        assert!(CompetingBidModel::Empirical { pairs: vec![[0.3, 0.5]] }.validate().is_err());
        assert!(CompetingBidModel::Empirical { pairs: vec![] }.validate().is_err());
        assert!(CompetingBidModel::Empirical { pairs: vec![[0.5, 0.3]] }.validate().is_ok());
    }

    #[test]
    fn mean_hi_matches_sampling() {
        let models = [
            CompetingBidModel::IidPair { marginal: ValuationModel::unit_uniform(), price_setter_allowed: true },
            CompetingBidModel::IidPair { marginal: ValuationModel::discrete_uniform(10).unwrap(), price_setter_allowed: true },
            CompetingBidModel::IidPair { marginal: ValuationModel::geometric(0.3).unwrap(), price_setter_allowed: true },
        ];
        for (k, m) in models.iter().enumerate() {
            let mut r = stream(200 + k as u64);
            let n = 400_000;
            let mean = (0..n).map(|_| m.sample(&mut r).hi).sum::<f64>() / n as f64;
            assert!((mean - m.mean_hi()).abs() < 0.01 * m.mean_hi(), "{m:?}: {mean} vs {}", m.mean_hi());
        }
    }
}
