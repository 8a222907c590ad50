//! Runtime diagnostics of the parameter conditions behind the convergence
//! guarantees.
//!
//! Each check evaluates one closed-form inequality using plug-in values
//! (distribution supports, a Monte-Carlo stationary multiplier). Conditions
//! involving the strong monotonicity constant, or the realized learning
//! dynamics, cannot be decided from a configuration and are reported as not
//! checkable.

use serde::{Deserialize, Serialize};

use super::dual::{find_stationary_multiplier, RootSearch};
use crate::error::Error;
use crate::matching::matching_probabilities;
use crate::params::StationaryMarket;
use crate::rng::{RngContract, StreamPurpose};
use crate::sim::{AgentSpec, PopulationSetup, StationaryAgent};
use crate::strategy::StrategyKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    NotCheckable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub id: String,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    fn push(&mut self, id: &str, status: CheckStatus, detail: impl Into<String>) {
        self.checks.push(AssumptionCheck { id: id.to_string(), status, detail: detail.into() });
    }

    fn cond(&mut self, id: &str, ok: bool, detail: impl Into<String>) {
        self.push(id, if ok { CheckStatus::Pass } else { CheckStatus::Fail }, detail);
    }

    pub fn get(&self, id: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail)
    }
}

/// How the initial budget and step size scale with the horizon, when known:
/// `k1 = C_k T^budget_exponent` and `eps = C_eps T^step_exponent`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub budget_exponent: Option<f64>,
    pub step_exponent: Option<f64>,
}

/// What to check.
#[derive(Debug, Clone, Copy)]
pub enum AssumptionContext<'a> {
    Stationary { market: &'a StationaryMarket, agent: &'a StationaryAgent, horizon: usize, scaling: Scaling },
    Population { setup: &'a PopulationSetup, agents: &'a [AgentSpec], scaling: Scaling },
}

pub fn check_assumptions(ctx: &AssumptionContext<'_>) -> AssumptionReport {
    match *ctx {
        AssumptionContext::Stationary { market, agent, horizon, scaling } => {
            check_stationary(market, agent, horizon, scaling)
        }
        AssumptionContext::Population { setup, agents, scaling } => check_population(setup, agents, scaling),
    }
}

const NOT_CHECKABLE_MONOTONICITY: &str = "depends on the strong monotonicity constant, which has no closed form";

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or("unbounded".into(), |v| format!("{v}"))
}

fn check_scaling(report: &mut AssumptionReport, scaling: Scaling, needs_budget: bool) {
    match scaling.step_exponent {
        Some(x) => report.cond(
            "step-size-vanishes-slowly",
            x < 0.0 && x > -1.0,
            format!("eps ~ T^{x}: need eps -> 0 and T eps -> infinity"),
        ),
        None => report.push("step-size-vanishes-slowly", CheckStatus::NotCheckable, "step size does not scale with T"),
    }
    if needs_budget {
        match scaling.budget_exponent {
            Some(y) => report.cond("budget-sublinear", y < 1.0, format!("k1 ~ T^{y}: need k1 / T -> 0")),
            None => report.push("budget-sublinear", CheckStatus::NotCheckable, "initial budget does not scale with T"),
        }
    }
}

fn check_stationary(market: &StationaryMarket, agent: &StationaryAgent, horizon: usize, scaling: Scaling) -> AssumptionReport {
    let mut r = AssumptionReport::default();
    let p = &agent.params;
    let delta = market.time_saving;
    let eps = p.step_size.at(1, horizon);
    r.cond("multiplier-bounds-ordered", p.mu_lo > 0.0 && p.mu_lo < p.mu_hi, format!("[{}, {}]", p.mu_lo, p.mu_hi));

    let karma_pacing = !matches!(agent.strategy, StrategyKind::AdaptivePacing);
    let share = if karma_pacing { market.gain_share } else { 0.0 };
    let rho = p.initial_karma / horizon as f64;
    let (d_lo, d_hi) = market.competing.support_hi();
    let mean_d = market.competing.mean_hi();

    let max_bid = delta / p.mu_lo;
    match d_hi {
        Some(top) => r.cond(
            "competing-bids-within-max-bid",
            top <= max_bid,
            format!("competing bids up to {top}, largest bid delta / mu_lo = {max_bid}"),
        ),
        None => r.cond("competing-bids-within-max-bid", false, "competing bids are unbounded"),
    }
    r.cond(
        "target-rate-feasible",
        rho > 0.0 && rho < (1.0 - share) * mean_d,
        format!("rho = k1 / T = {rho}, (1 - gain share) E[d] = {}", (1.0 - share) * mean_d),
    );

    if karma_pacing {
        let mut rng = RngContract::new(0).stream(0, 0, StreamPurpose::Estimator);
        let search = RootSearch { lo: p.mu_lo, hi: p.mu_hi, tol: 1e-3, initial_samples: 20_000, max_samples: 200_000 };
        match find_stationary_multiplier(market, &search, &mut rng) {
            Ok(root) => r.cond(
                "stationary-multiplier-inside-bounds",
                root.multiplier > p.mu_lo && root.multiplier < p.mu_hi,
                format!("estimated stationary multiplier {:.4}", root.multiplier),
            ),
            Err(Error::NoSignChange { loss_lo, loss_hi, .. }) => r.cond(
                "stationary-multiplier-inside-bounds",
                false,
                format!("expected loss does not change sign on the bounds ({loss_lo:.3e}, {loss_hi:.3e})"),
            ),
            Err(e) => r.cond("stationary-multiplier-inside-bounds", false, e.to_string()),
        }
    }
    r.push("step-size-below-monotonicity-limit", CheckStatus::NotCheckable, NOT_CHECKABLE_MONOTONICITY);

    let v_lo = market.valuation.support_min();
    let v_hi = market.valuation.support_max();
    r.cond("valuation-floor-positive", v_lo > 0.0, format!("valuations from {v_lo} to {}", fmt_opt(v_hi)));
    r.cond(
        "competing-bid-floor-positive",
        d_lo > 0.0 && d_hi.is_some(),
        format!("competing bids from {d_lo} to {}", fmt_opt(d_hi)),
    );

    if karma_pacing {
        match d_hi {
            Some(top) if v_lo > 0.0 && d_lo > 0.0 => {
                let lo_cap = delta * v_lo / (top * top);
                let hi_floor = delta / d_lo;
                r.cond(
                    "hitting-time-multiplier-bounds",
                    p.mu_lo < lo_cap && p.mu_hi > hi_floor,
                    format!("need mu_lo < {lo_cap} and mu_hi > {hi_floor}"),
                );
                let eps_cap = (lo_cap - p.mu_lo).min((p.mu_hi - hi_floor) / top);
                r.cond("hitting-time-step-size", eps < eps_cap, format!("eps = {eps}, bound {eps_cap}"));
            }
            Some(_) => {
                r.cond("hitting-time-multiplier-bounds", false, "requires positive valuation and competing-bid floors");
                r.cond("hitting-time-step-size", false, "requires positive valuation and competing-bid floors");
            }
            None => {
                r.push("hitting-time-multiplier-bounds", CheckStatus::NotCheckable, "competing bids are unbounded");
                r.push("hitting-time-step-size", CheckStatus::NotCheckable, "competing bids are unbounded");
            }
        }
        let need = (p.mu_hi - p.initial_multiplier) / eps + max_bid;
        r.cond("hitting-time-budget", p.initial_karma > need, format!("k1 = {}, need > {need}", p.initial_karma));
    }
    check_scaling(&mut r, scaling, karma_pacing);
    r
}

fn check_population(setup: &PopulationSetup, agents: &[AgentSpec], scaling: Scaling) -> AssumptionReport {
    let mut r = AssumptionReport::default();
    let mech = &setup.mechanism;
    if let Err(e) = mech.validate() {
        r.cond("mechanism-valid", false, e.to_string());
        return r;
    }
    if agents.is_empty() || agents.len() != mech.n_agents {
        r.cond("mechanism-valid", false, "agent list does not match the population size");
        return r;
    }
    let horizon = mech.horizon;
    let n = mech.n_agents as f64;
    let share = mech.gain_share();
    let delta = mech.time_saving;
    let mu_lo = agents.iter().map(|a| a.params.mu_lo).fold(f64::INFINITY, f64::min);
    let mu_hi = agents.iter().map(|a| a.params.mu_hi).fold(f64::NEG_INFINITY, f64::max);
    let mu_m = agents.iter().map(|a| a.params.initial_multiplier).sum::<f64>() / n;
    let v_lo = agents.iter().map(|a| a.valuation.support_min()).fold(f64::INFINITY, f64::min);
    let eps: Vec<f64> = agents.iter().map(|a| a.params.step_size.at(1, horizon)).collect();
    let shared = agents.windows(2).all(|w| w[0].params.step_size == w[1].params.step_size);

    r.cond("multiplier-bounds-ordered", mu_lo > 0.0 && mu_lo < mu_hi, format!("[{mu_lo}, {mu_hi}]"));
    let symmetric = agents.windows(2).all(|w| w[0].valuation == w[1].valuation && w[0].strategy == w[1].strategy);
    if symmetric {
        r.cond(
            "stationary-multiplier-inside-bounds",
            mu_m > mu_lo && mu_m < mu_hi,
            format!("symmetric stationary multiplier equals the mean initial multiplier {mu_m}"),
        );
    } else {
        r.push("stationary-multiplier-inside-bounds", CheckStatus::NotCheckable, "asymmetric population");
    }
    r.cond("shared-step-size", shared, "all agents use the same step size rule");
    r.push("step-size-below-monotonicity-limit", CheckStatus::NotCheckable, NOT_CHECKABLE_MONOTONICITY);

    let lo_cap = v_lo / 2.0 * mu_m;
    let hi_floor = if v_lo > 0.0 { mu_m * (1.0 + 2.0 / v_lo / (1.0 - share) - v_lo / 2.0) } else { f64::INFINITY };
    r.cond(
        "population-multiplier-bounds",
        mu_lo > 0.0 && mu_lo < lo_cap && mu_hi >= hi_floor,
        format!("valuation floor {v_lo}: need mu_lo < {lo_cap} and mu_hi >= {hi_floor}"),
    );
    let eps_max = eps.iter().cloned().fold(0.0, f64::max);
    let step_cap = if v_lo > 0.0 {
        let a = (1.0 - v_lo / 2.0) / share;
        let b = v_lo / 2.0 / (1.0 + (v_lo + 1.0) * share);
        let c = 1.0 / v_lo / (1.0 - share * share);
        mu_m * mu_lo / delta * a.min(b).min(c)
    } else {
        0.0
    };
    r.cond("population-step-size", eps_max > 0.0 && eps_max < step_cap, format!("eps = {eps_max}, bound {step_cap}"));

    let max_bid = delta / mu_lo;
    let worst = agents
        .iter()
        .zip(&eps)
        .map(|(a, &e)| a.params.initial_karma - ((a.params.mu_hi - a.params.initial_multiplier) / e + max_bid))
        .fold(f64::INFINITY, f64::min);
    r.cond("hitting-time-budget", worst > 0.0, format!("smallest margin k1 - ((mu_hi - mu1) / eps + delta / mu_lo) = {worst}"));
    r.push(
        "hitting-time-dynamics",
        CheckStatus::NotCheckable,
        "concerns the realized dynamics; measure it with the hitting-time experiment",
    );

    if mech.n_auctions > 1 {
        match matching_probabilities(&setup.matching, mech.n_agents, mech.n_auctions) {
            Ok(a) => {
                let norm = a.iter().map(|row| row.iter().map(|x| x * x).sum::<f64>().sqrt()).fold(0.0, f64::max);
                r.push(
                    "matching-concentration",
                    CheckStatus::NotCheckable,
                    format!("sqrt(N) max ||a_i|| = {:.4}; boundedness is a statement about N -> infinity", n.sqrt() * norm),
                );
            }
            Err(e) => r.cond("matching-concentration", false, e.to_string()),
        }
    }
    check_scaling(&mut r, scaling, true);
    r
}
