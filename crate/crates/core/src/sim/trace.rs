use serde::{Deserialize, Serialize};

use super::{Observer, RoundView};
use crate::error::{Error, Result};
use crate::hindsight::HindsightInstance;
use crate::strategy::{hitting_time, AgentState, HittingTimes};

/// Full per-round record of a simulation.
///
/// Columns are stored round-major: the entry of agent `i` in round `t`
/// (1-based) sits at index `(t - 1) * n_agents + i`. `karma` and
/// `multiplier` hold the state at the start of each round.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub n_agents: usize,
    pub horizon: usize,
    pub valuation: Vec<f64>,
    pub bid: Vec<f64>,
    pub won: Vec<bool>,
    pub payment: Vec<f64>,
    pub gain: Vec<f64>,
    pub competing_hi: Vec<f64>,
    pub competing_lo: Vec<f64>,
    pub karma: Vec<f64>,
    pub multiplier: Vec<f64>,
    pub cost: Vec<f64>,
    pub saved: Vec<f64>,
    pub final_states: Vec<AgentState>,
}

impl Trace {
    /// Number of recorded rounds.
    pub fn rounds(&self) -> usize {
        if self.n_agents == 0 {
            0
        } else {
            self.valuation.len() / self.n_agents
        }
    }

    /// Column entries of one agent, in round order.
    pub fn column<T: Copy>(&self, column: &[T], agent: usize) -> Vec<T> {
        column.iter().skip(agent).step_by(self.n_agents.max(1)).copied().collect()
    }

    /// Realized cost `sum_t v_t (1 - x_t delta)` of one agent.
    pub fn sample_path_cost(&self, agent: usize) -> f64 {
        self.column(&self.cost, agent).iter().sum()
    }

    pub fn cumulative_saved(&self, agent: usize) -> f64 {
        self.column(&self.saved, agent).iter().sum()
    }

    pub fn hitting_times(&self, agent: usize, karma_floor: f64, mu_lo: f64, mu_hi: f64) -> Result<HittingTimes> {
        hitting_time(&self.column(&self.karma, agent), &self.column(&self.multiplier, agent), karma_floor, mu_lo, mu_hi)
    }

    /// Hindsight problem on the path one agent experienced.
    pub fn hindsight_instance(&self, agent: usize, budget: f64, gain_share: f64, time_saving: f64) -> Result<HindsightInstance> {
        if agent >= self.n_agents {
            return Err(Error::DimensionMismatch(format!("agent {agent} out of range")));
        }
        Ok(HindsightInstance {
            valuations: self.column(&self.valuation, agent),
            competing: self.column(&self.competing_hi, agent),
            time_saving,
            budget,
            gain_share,
        })
    }

    /// Total karma at the start of each round followed by the final total.
    pub fn karma_totals(&self) -> Vec<f64> {
        self.totals(&self.karma, |s| s.karma)
    }

    /// Sum of multipliers at the start of each round followed by the final sum.
    pub fn multiplier_totals(&self) -> Vec<f64> {
        self.totals(&self.multiplier, |s| s.multiplier)
    }

    fn totals(&self, column: &[f64], last: impl Fn(&AgentState) -> f64) -> Vec<f64> {
        let mut out: Vec<f64> = column.chunks(self.n_agents.max(1)).map(|c| c.iter().sum()).collect();
        if !self.final_states.is_empty() {
            out.push(self.final_states.iter().map(last).sum());
        }
        out
    }
}

/// Observer that records a [`Trace`].
#[derive(Debug, Clone, Default)]
pub struct TraceRecorder {
    trace: Trace,
}

impl TraceRecorder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_trace(self) -> Trace {
        self.trace
    }
}

impl Observer for TraceRecorder {
    fn on_round(&mut self, view: &RoundView<'_>) {
        let tr = &mut self.trace;
        if tr.n_agents == 0 {
            tr.n_agents = view.before.len();
            tr.horizon = view.horizon;
        }
        tr.valuation.extend_from_slice(view.valuations);
        tr.bid.extend_from_slice(view.bids);
        tr.won.extend_from_slice(view.winners);
        tr.payment.extend_from_slice(view.payments);
        tr.gain.extend_from_slice(view.gains);
        tr.competing_hi.extend_from_slice(view.competing_hi);
        tr.competing_lo.extend_from_slice(view.competing_lo);
        tr.karma.extend(view.before.iter().map(|s| s.karma));
        tr.multiplier.extend(view.before.iter().map(|s| s.multiplier));
        tr.cost.extend_from_slice(view.costs);
        tr.saved.extend_from_slice(view.saved);
    }

    fn on_finish(&mut self, final_states: &[AgentState]) {
        self.trace.final_states = final_states.to_vec();
    }
}
