use serde::{Deserialize, Serialize};

use super::{Observer, RoundView};
use crate::strategy::{AgentState, HittingTimes, HittingTracker};

/// Running totals for one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub cost: f64,
    pub saved: f64,
    pub payments: f64,
    pub gains: f64,
    pub wins: usize,
    pub hitting: HittingTimes,
    pub final_state: AgentState,
}

/// Accumulates per-agent totals and hitting times without storing the path.
#[derive(Debug, Clone)]
pub struct SummaryObserver {
    cost: Vec<f64>,
    saved: Vec<f64>,
    payments: Vec<f64>,
    gains: Vec<f64>,
    wins: Vec<usize>,
    trackers: Vec<HittingTracker>,
    finals: Vec<AgentState>,
}

impl SummaryObserver {
    /// One tracker per agent, each with its own karma floor and multiplier bounds.
    pub fn new(trackers: Vec<HittingTracker>) -> Self {
        let n = trackers.len();
        Self {
            cost: vec![0.0; n],
            saved: vec![0.0; n],
            payments: vec![0.0; n],
            gains: vec![0.0; n],
            wins: vec![0; n],
            trackers,
            finals: Vec::new(),
        }
    }

    pub fn summaries(&self) -> Vec<AgentSummary> {
        (0..self.cost.len())
            .map(|i| AgentSummary {
                cost: self.cost[i],
                saved: self.saved[i],
                payments: self.payments[i],
                gains: self.gains[i],
                wins: self.wins[i],
                hitting: self.trackers[i].times(),
                final_state: self.finals.get(i).copied().unwrap_or(AgentState::with(f64::NAN, f64::NAN)),
            })
            .collect()
    }
}

impl Observer for SummaryObserver {
    fn on_round(&mut self, view: &RoundView<'_>) {
        for i in 0..self.cost.len() {
            self.cost[i] += view.costs[i];
            self.saved[i] += view.saved[i];
            self.payments[i] += view.payments[i];
            self.gains[i] += view.gains[i];
            self.wins[i] += view.winners[i] as usize;
            self.trackers[i].observe(view.t, view.before[i].karma, view.before[i].multiplier);
        }
    }

    fn on_finish(&mut self, final_states: &[AgentState]) {
        self.finals = final_states.to_vec();
    }
}

/// Time average of `||mu_t - target||^2` over rounds `1..=T`, using the
/// multipliers at the start of each round.
#[derive(Debug, Clone)]
pub struct DistanceAccumulator {
    target: Vec<f64>,
    sum: f64,
    rounds: usize,
    last: f64,
}

impl DistanceAccumulator {
    pub fn new(target: Vec<f64>) -> Self {
        Self { target, sum: 0.0, rounds: 0, last: f64::NAN }
    }

    pub fn time_average(&self) -> f64 {
        self.sum / self.rounds.max(1) as f64
    }

    /// Squared distance of the last observed round.
    pub fn last(&self) -> f64 {
        self.last
    }
}

impl Observer for DistanceAccumulator {
    fn on_round(&mut self, view: &RoundView<'_>) {
        let d: f64 = view.before.iter().zip(&self.target).map(|(s, m)| (s.multiplier - m).powi(2)).sum();
        self.sum += d;
        self.rounds += 1;
        self.last = d;
    }
}

/// Largest relative drift of total karma and of the multiplier sum from
/// their values at the start of round 1.
#[derive(Debug, Clone, Default)]
pub struct ConservationMonitor {
    karma0: Option<f64>,
    mu0: f64,
    pub max_karma_drift: f64,
    pub max_multiplier_drift: f64,
}

impl ConservationMonitor {
    pub fn new() -> Self {
        Self::default()
    }

    fn check(&mut self, states: &[AgentState]) {
        let k: f64 = states.iter().map(|s| s.karma).sum();
        let mu: f64 = states.iter().map(|s| s.multiplier).sum();
        let (k0, mu0) = (self.karma0.unwrap_or(k), self.mu0);
        self.max_karma_drift = self.max_karma_drift.max((k - k0).abs() / k0.abs().max(f64::MIN_POSITIVE));
        self.max_multiplier_drift = self.max_multiplier_drift.max((mu - mu0).abs() / mu0.abs().max(f64::MIN_POSITIVE));
    }
}

impl Observer for ConservationMonitor {
    fn on_round(&mut self, view: &RoundView<'_>) {
        if self.karma0.is_none() {
            self.karma0 = Some(view.before.iter().map(|s| s.karma).sum());
            self.mu0 = view.before.iter().map(|s| s.multiplier).sum();
        }
        self.check(view.after);
    }
}

/// One recorded point of an agent's path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub t: usize,
    pub karma: f64,
    pub multiplier: f64,
    pub cumulative_saved: f64,
}

/// Records selected agents' state after every `every`-th round.
#[derive(Debug, Clone)]
pub struct PathRecorder {
    agents: Vec<usize>,
    every: usize,
    saved: Vec<f64>,
    pub paths: Vec<Vec<PathPoint>>,
}

impl PathRecorder {
    pub fn new(agents: Vec<usize>, every: usize) -> Self {
        let n = agents.len();
        Self { agents, every: every.max(1), saved: vec![0.0; n], paths: vec![Vec::new(); n] }
    }
}

impl Observer for PathRecorder {
    fn on_round(&mut self, view: &RoundView<'_>) {
        for (j, &i) in self.agents.iter().enumerate() {
            self.saved[j] += view.saved[i];
            if view.t % self.every == 0 || view.t == view.horizon {
                let s = view.after[i];
                self.paths[j].push(PathPoint {
                    t: view.t,
                    karma: s.karma,
                    multiplier: s.multiplier,
                    cumulative_saved: self.saved[j],
                });
            }
        }
    }
}

/// Collects one agent's valuations, competing bids and gains for hindsight
/// benchmarks.
#[derive(Debug, Clone, Default)]
pub struct SamplePathCollector {
    pub agent: usize,
    pub valuations: Vec<f64>,
    pub competing: Vec<f64>,
    pub gains: Vec<f64>,
    pub cost: f64,
}

impl SamplePathCollector {
    pub fn new(agent: usize) -> Self {
        Self { agent, ..Self::default() }
    }
}

impl Observer for SamplePathCollector {
    fn on_round(&mut self, view: &RoundView<'_>) {
        let i = self.agent;
        self.valuations.push(view.valuations[i]);
        self.competing.push(view.competing_hi[i]);
        self.gains.push(view.gains[i]);
        self.cost += view.costs[i];
    }
}
