//! Bidding policies and their state transitions.
//!
//! Each policy bids a valuation scaled down by a pacing multiplier and
//! capped by the current karma balance, then adjusts the multiplier from
//! the observed payment (and, for karma pacing, the observed gain).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::AgentParams;

/// Evolving state of one agent at the start of a round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub karma: f64,
    /// Unprojected under karma pacing, so it may leave the multiplier bounds.
    pub multiplier: f64,
    /// 1-based index of the next round.
    pub round: usize,
}

impl AgentState {
    pub fn new(params: &AgentParams) -> Self {
        Self { karma: params.initial_karma, multiplier: params.initial_multiplier, round: 1 }
    }

    pub fn with(karma: f64, multiplier: f64) -> Self {
        Self { karma, multiplier, round: 1 }
    }
}

/// Karma pacing bid: `min(delta v / clamp(mu), k)`.
#[inline]
pub fn bid_k(state: &AgentState, valuation: f64, params: &AgentParams, time_saving: f64) -> f64 {
    let mu = state.multiplier.clamp(params.mu_lo, params.mu_hi);
    (time_saving * valuation / mu).min(state.karma)
}

/// Karma pacing update: `mu + eps (z - g)` without projection, `k - z + g`.
#[inline]
pub fn update_k(state: &AgentState, payment: f64, gain: f64, eps: f64) -> AgentState {
    AgentState {
        karma: state.karma - payment + gain,
        multiplier: state.multiplier + eps * (payment - gain),
        round: state.round + 1,
    }
}

/// Adaptive pacing bid: `min(delta v / mu, k)`.
#[inline]
pub fn bid_a(state: &AgentState, valuation: f64, time_saving: f64) -> f64 {
    (time_saving * valuation / state.multiplier).min(state.karma)
}

/// Adaptive pacing update: `clamp(mu + eps (z - rho))`, `k - z`.
#[inline]
pub fn update_a(state: &AgentState, payment: f64, eps: f64, rho: f64, mu_lo: f64, mu_hi: f64) -> AgentState {
    AgentState {
        karma: state.karma - payment,
        multiplier: (state.multiplier + eps * (payment - rho)).clamp(mu_lo, mu_hi),
        round: state.round + 1,
    }
}

/// Gain-aware adaptive pacing bid: `min(delta v / (1 + mu), k)`.
#[inline]
pub fn bid_a_gain(state: &AgentState, valuation: f64, time_saving: f64) -> f64 {
    (time_saving * valuation / (1.0 + state.multiplier)).min(state.karma)
}

/// Gain-aware adaptive pacing update: `clamp(mu + eps (z - g - rho), 0, mu_hi)`, `k - z + g`.
#[inline]
pub fn update_a_gain(state: &AgentState, payment: f64, gain: f64, eps: f64, rho: f64, mu_hi: f64) -> AgentState {
    AgentState {
        karma: state.karma - payment + gain,
        multiplier: (state.multiplier + eps * (payment - gain - rho)).clamp(0.0, mu_hi),
        round: state.round + 1,
    }
}

/// Bidding policy of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StrategyKind {
    KarmaPacing,
    AdaptivePacing,
    AdaptivePacingWithGain,
    /// Bids `factor` times the base policy's uncapped bid, learns like the base.
    ScaledDeviation { factor: f64, base: Box<StrategyKind> },
    /// Bids all karma on planned rounds and nothing otherwise.
    Hindsight { plan: Vec<bool> },
    /// Bids with a fixed multiplier and never learns.
    TruthfulCapped { multiplier: f64 },
}

impl StrategyKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            StrategyKind::ScaledDeviation { factor, base } => {
                if !(*factor > 0.0 && factor.is_finite()) {
                    return Err(Error::InvalidConfig(format!("deviation factor must be positive, got {factor}")));
                }
                base.validate()
            }
            StrategyKind::TruthfulCapped { multiplier } if !(*multiplier > 0.0 && multiplier.is_finite()) => {
                Err(Error::InvalidConfig(format!("fixed multiplier must be positive, got {multiplier}")))
            }
            _ => Ok(()),
        }
    }

    /// Short label used in output files.
    pub fn label(&self) -> String {
        match self {
            StrategyKind::KarmaPacing => "K".into(),
            StrategyKind::AdaptivePacing => "A".into(),
            StrategyKind::AdaptivePacingWithGain => "A-gain".into(),
            StrategyKind::ScaledDeviation { factor, base } => format!("scaled-{factor}-{}", base.label()),
            StrategyKind::Hindsight { .. } => "hindsight".into(),
            StrategyKind::TruthfulCapped { multiplier } => format!("fixed-{multiplier}"),
        }
    }

    /// Bid before the karma cap.
    fn uncapped_bid(&self, state: &AgentState, valuation: f64, params: &AgentParams, time_saving: f64) -> f64 {
        let uncapped = AgentState { karma: f64::INFINITY, ..*state };
        match self {
            StrategyKind::KarmaPacing => bid_k(&uncapped, valuation, params, time_saving),
            StrategyKind::AdaptivePacing => bid_a(&uncapped, valuation, time_saving),
            StrategyKind::AdaptivePacingWithGain => bid_a_gain(&uncapped, valuation, time_saving),
            StrategyKind::ScaledDeviation { factor, base } => {
                factor * base.uncapped_bid(state, valuation, params, time_saving)
            }
            StrategyKind::Hindsight { plan } => {
                if plan.get(state.round - 1).copied().unwrap_or(false) {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            StrategyKind::TruthfulCapped { multiplier } => time_saving * valuation / multiplier,
        }
    }

    #[inline]
    pub fn bid(&self, state: &AgentState, valuation: f64, params: &AgentParams, time_saving: f64) -> f64 {
        match self {
            StrategyKind::KarmaPacing => bid_k(state, valuation, params, time_saving),
            StrategyKind::AdaptivePacing => bid_a(state, valuation, time_saving),
            _ => self.uncapped_bid(state, valuation, params, time_saving).min(state.karma).max(0.0),
        }
    }

    /// State after observing payment `z` and gain `g`.
    ///
    /// `gain` is both what the agent observes and what its budget receives;
    /// adaptive pacing ignores it when learning but still banks it.
    #[inline]
    pub fn update(&self, state: &AgentState, payment: f64, gain: f64, eps: f64, params: &AgentParams) -> AgentState {
        match self {
            StrategyKind::KarmaPacing => update_k(state, payment, gain, eps),
            StrategyKind::AdaptivePacing => {
                let mut next = update_a(state, payment, eps, params.target_rate, params.mu_lo, params.mu_hi);
                next.karma += gain;
                next
            }
            StrategyKind::AdaptivePacingWithGain => {
                update_a_gain(state, payment, gain, eps, params.target_rate, params.mu_hi)
            }
            StrategyKind::ScaledDeviation { base, .. } => base.update(state, payment, gain, eps, params),
            StrategyKind::Hindsight { .. } | StrategyKind::TruthfulCapped { .. } => AgentState {
                karma: state.karma - payment + gain,
                multiplier: state.multiplier,
                round: state.round + 1,
            },
        }
    }
}

/// Last rounds up to which the bid is guaranteed to be uncapped and unclamped.
///
/// Each entry is the largest `t` such that the condition held in every round
/// `1..=t`; 0 means it already failed in round 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HittingTimes {
    /// Karma stayed at least `delta / mu_lo`.
    pub karma: usize,
    /// Multiplier stayed at least `mu_lo`.
    pub mu_lo: usize,
    /// Multiplier stayed at most `mu_hi`.
    pub mu_hi: usize,
    pub overall: usize,
}

/// Streaming computation of [`HittingTimes`].
#[derive(Debug, Clone)]
pub struct HittingTracker {
    karma_floor: f64,
    mu_lo: f64,
    mu_hi: f64,
    times: HittingTimes,
    alive: [bool; 3],
}

impl HittingTracker {
    pub fn new(karma_floor: f64, mu_lo: f64, mu_hi: f64) -> Self {
        Self {
            karma_floor,
            mu_lo,
            mu_hi,
            times: HittingTimes { karma: 0, mu_lo: 0, mu_hi: 0, overall: 0 },
            alive: [true; 3],
        }
    }

    pub fn for_agent(params: &AgentParams, time_saving: f64) -> Self {
        Self::new(params.max_bid(time_saving), params.mu_lo, params.mu_hi)
    }

    /// Records the state at the start of round `t` (1-based, consecutive).
    #[inline]
    pub fn observe(&mut self, t: usize, karma: f64, multiplier: f64) {
        let checks = [karma >= self.karma_floor, multiplier >= self.mu_lo, multiplier <= self.mu_hi];
        let slots = [&mut self.times.karma, &mut self.times.mu_lo, &mut self.times.mu_hi];
        for ((alive, ok), slot) in self.alive.iter_mut().zip(checks).zip(slots) {
            if *alive {
                if ok {
                    *slot = t;
                } else {
                    *alive = false;
                }
            }
        }
    }

    pub fn times(&self) -> HittingTimes {
        let t = self.times;
        HittingTimes { overall: t.karma.min(t.mu_lo).min(t.mu_hi), ..t }
    }
}

/// Hitting times of a recorded path; `karma[s]` and `multiplier[s]` are the
/// state at the start of round `s + 1`.
pub fn hitting_time(karma: &[f64], multiplier: &[f64], karma_floor: f64, mu_lo: f64, mu_hi: f64) -> Result<HittingTimes> {
    if karma.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if karma.len() != multiplier.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} karma entries vs {} multiplier entries",
            karma.len(),
            multiplier.len()
        )));
    }
    let mut tracker = HittingTracker::new(karma_floor, mu_lo, mu_hi);
    for (s, (&k, &mu)) in karma.iter().zip(multiplier).enumerate() {
        tracker.observe(s + 1, k, mu);
    }
    Ok(tracker.times())
}
