//! Static configuration shared by the auction, the strategies and the engines.

use serde::{Deserialize, Serialize};

use crate::distributions::{CompetingBidModel, ValuationModel};
use crate::error::{invalid, Result};

/// Mechanism-level parameters of the repeated auction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismParams {
    /// Population size.
    pub n_agents: usize,
    /// Number of winners per auction.
    pub capacity: usize,
    /// Number of auctions held in parallel each round.
    #[serde(default = "one")]
    pub n_auctions: usize,
    /// Utility saved per unit valuation when winning.
    pub time_saving: f64,
    /// Number of rounds.
    pub horizon: usize,
}

fn one() -> usize {
    1
}

impl MechanismParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_agents < 2 {
            return Err(invalid(format!("need at least two agents, got {}", self.n_agents)));
        }
        if self.capacity < 1 || self.capacity >= self.n_agents {
            return Err(invalid(format!(
                "capacity must satisfy 1 <= capacity <= n_agents - 1, got {} with {} agents",
                self.capacity, self.n_agents
            )));
        }
        if self.n_auctions < 1 {
            return Err(invalid("need at least one auction"));
        }
        if !(self.time_saving >= 0.0 && self.time_saving.is_finite()) {
            return Err(invalid(format!("time saving must be finite and >= 0, got {}", self.time_saving)));
        }
        if self.horizon < 1 {
            return Err(invalid("horizon must be at least one round"));
        }
        Ok(())
    }

    /// Redistributed share of each auction's price, `capacity / n_agents`.
    pub fn gain_share(&self) -> f64 {
        self.capacity as f64 / self.n_agents as f64
    }
}

/// Gradient step size rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepSchedule {
    Fixed { eps: f64 },
    /// `coefficient * t^exponent`, re-evaluated every round (t starts at 1).
    PowerLaw { coefficient: f64, exponent: f64 },
    /// `coefficient * T^exponent`, constant over the horizon.
    HorizonPower { coefficient: f64, exponent: f64 },
}

impl StepSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepSchedule::Fixed { eps } => eps > 0.0 && eps.is_finite(),
            StepSchedule::PowerLaw { coefficient, exponent } | StepSchedule::HorizonPower { coefficient, exponent } => {
                coefficient > 0.0 && coefficient.is_finite() && exponent.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("step size must be positive and finite: {self:?}")))
        }
    }

    /// Step size used in round `t` (1-based) of a horizon of `horizon` rounds.
    #[inline]
    pub fn at(&self, t: usize, horizon: usize) -> f64 {
        match *self {
            StepSchedule::Fixed { eps } => eps,
            StepSchedule::PowerLaw { coefficient, exponent } => coefficient * (t as f64).powf(exponent),
            StepSchedule::HorizonPower { coefficient, exponent } => coefficient * (horizon as f64).powf(exponent),
        }
    }

    /// Whether every round uses the same step size.
    pub fn is_constant(&self) -> bool {
        !matches!(self, StepSchedule::PowerLaw { exponent, .. } if *exponent != 0.0)
    }
}

/// Per-agent configuration of a pacing strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    pub initial_karma: f64,
    pub initial_multiplier: f64,
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub step_size: StepSchedule,
    /// Target expenditure per round, `initial_karma / horizon` for adaptive pacing.
    #[serde(default)]
    pub target_rate: f64,
}

impl AgentParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_karma >= 0.0 && self.initial_karma.is_finite()) {
            return Err(invalid(format!("initial karma must be finite and >= 0, got {}", self.initial_karma)));
        }
        if !(self.mu_lo > 0.0 && self.mu_lo < self.mu_hi && self.mu_hi.is_finite()) {
            return Err(invalid(format!(
                "multiplier bounds must satisfy 0 < mu_lo < mu_hi, got [{}, {}]",
                self.mu_lo, self.mu_hi
            )));
        }
        if !(self.initial_multiplier >= self.mu_lo && self.initial_multiplier <= self.mu_hi) {
            return Err(invalid(format!(
                "initial multiplier {} outside [{}, {}]",
                self.initial_multiplier, self.mu_lo, self.mu_hi
            )));
        }
        if !(self.target_rate >= 0.0 && self.target_rate.is_finite()) {
            return Err(invalid(format!("target rate must be finite and >= 0, got {}", self.target_rate)));
        }
        self.step_size.validate()
    }

    /// Sets `target_rate = initial_karma / horizon`.
    pub fn with_target_rate_for(mut self, horizon: usize) -> Self {
        self.target_rate = self.initial_karma / horizon as f64;
        self
    }

    /// Largest bid the agent can ever place with unit valuation: `delta / mu_lo`.
    pub fn max_bid(&self, time_saving: f64) -> f64 {
        time_saving / self.mu_lo
    }
}

/// Environment seen by a single agent bidding against stationary competition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryMarket {
    pub valuation: ValuationModel,
    pub competing: CompetingBidModel,
    /// Fraction of the price redistributed to the agent, `gamma / N`.
    pub gain_share: f64,
    pub time_saving: f64,
}

impl StationaryMarket {
    pub fn validate(&self) -> Result<()> {
        self.valuation.validate()?;
        self.competing.validate()?;
        if !(0.0..=1.0).contains(&self.gain_share) {
            return Err(invalid(format!("gain share must lie in [0, 1], got {}", self.gain_share)));
        }
        if !(self.time_saving >= 0.0 && self.time_saving.is_finite()) {
            return Err(invalid(format!("time saving must be finite and >= 0, got {}", self.time_saving)));
        }
        Ok(())
    }

    /// Gain of one round given the agent's bid: the redistributed share of
    /// the price the agent's bid induces.
    #[inline]
    pub fn gain(&self, bid: f64, hi: f64, lo: f64) -> f64 {
        let price = if bid > hi {
            hi
        } else if bid > lo {
            bid
        } else {
            lo
        };
        self.gain_share * price
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mech(n: usize, gamma: usize) -> MechanismParams {
        MechanismParams { n_agents: n, capacity: gamma, n_auctions: 1, time_saving: 5.0, horizon: 10 }
    }

    #[test]
    fn capacity_bounds() {
        assert!(mech(4, 1).validate().is_ok());
        assert!(mech(4, 3).validate().is_ok());
        assert!(mech(4, 4).validate().is_err());
        assert!(mech(4, 0).validate().is_err());
    }

    #[test]
    fn gain_share_example() {
        let m = mech(50, 5);
        assert!((m.gain_share() * 0.4 - 0.04).abs() < 1e-15);
    }

    #[test]
    fn schedules() {
        let f = StepSchedule::Fixed { eps: 0.01 };
        assert_eq!(f.at(1, 100), 0.01);
        let p = StepSchedule::PowerLaw { coefficient: 2.0, exponent: -0.5 };
        assert!((p.at(4, 100) - 1.0).abs() < 1e-15);
        let h = StepSchedule::HorizonPower { coefficient: 40.0, exponent: -0.5 };
        assert!((h.at(1, 10_000) - 0.4).abs() < 1e-15);
        assert_eq!(h.at(1, 10_000), h.at(9_999, 10_000));
        assert!(StepSchedule::Fixed { eps: 0.0 }.validate().is_err());
    }

    #[test]
    fn agent_bounds_validated() {
        let good = AgentParams {
            initial_karma: 10.0,
            initial_multiplier: 5.0,
            mu_lo: 0.1,
            mu_hi: 1000.0,
            step_size: StepSchedule::Fixed { eps: 0.1 },
            target_rate: 0.0,
        };
        assert!(good.validate().is_ok());
        let mut bad = good.clone();
        bad.mu_lo = 1000.0;
        assert!(bad.validate().is_err());
        let mut bad = good.clone();
        bad.initial_multiplier = 0.05;
        assert!(bad.validate().is_err());
        assert_eq!(good.with_target_rate_for(50).target_rate, 0.2);
    }

    #[test]
    fn stationary_gain_branches() {
        let m = StationaryMarket {
            valuation: ValuationModel::unit_uniform(),
            competing: CompetingBidModel::IidPair { marginal: ValuationModel::unit_uniform(), price_setter_allowed: true },
            gain_share: 0.1,
            time_saving: 5.0,
        };
        assert!((m.gain(0.9, 0.5, 0.3) - 0.05).abs() < 1e-15);
        assert!((m.gain(0.4, 0.5, 0.3) - 0.04).abs() < 1e-15);
        assert!((m.gain(0.5, 0.5, 0.3) - 0.05).abs() < 1e-15);
        assert!((m.gain(0.1, 0.5, 0.3) - 0.03).abs() < 1e-15);
    }
}
