use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Observer, RoundView};
use crate::auction::{cost_and_saved, Clearing, PeriodOutcome};
use crate::distributions::ValuationModel;
use crate::error::{invalid, Error, Result};
use crate::matching::{Matcher, MatchingModel};
use crate::params::{AgentParams, MechanismParams};
use crate::rng::{RngContract, RngStream, StreamPurpose, POPULATION};
use crate::strategy::{AgentState, StrategyKind};

/// One member of a learning population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub params: AgentParams,
    pub strategy: StrategyKind,
    pub valuation: ValuationModel,
}

/// Mechanism, matching and whether payments are redistributed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSetup {
    pub mechanism: MechanismParams,
    pub matching: MatchingModel,
    /// Without redistribution every agent's gain is zero and karma only drains.
    pub redistribute: bool,
}

impl PopulationSetup {
    pub fn single_auction(mechanism: MechanismParams) -> Self {
        Self { mechanism, matching: MatchingModel::UniformRandom, redistribute: true }
    }
}

/// Simultaneous learning in a single auction per round.
pub fn run_simultaneous<O: Observer>(
    setup: &PopulationSetup,
    agents: &[AgentSpec],
    contract: &RngContract,
    replication: u64,
    observer: O,
) -> Result<Vec<AgentState>> {
    if setup.mechanism.n_auctions != 1 {
        return Err(invalid(format!(
            "simultaneous learning uses one auction, got {}",
            setup.mechanism.n_auctions
        )));
    }
    run_population(setup, agents, contract, replication, observer)
}

/// Learning across `M` parallel auctions with random matching.
pub fn run_parallel<O: Observer>(
    setup: &PopulationSetup,
    agents: &[AgentSpec],
    contract: &RngContract,
    replication: u64,
    observer: O,
) -> Result<Vec<AgentState>> {
    run_population(setup, agents, contract, replication, observer)
}

/// Shared engine for single and parallel auctions.
///
/// Round order: draw valuations, place bids, draw auction assignments and
/// tie-break priorities, clear, then update every agent with its payment
/// and the round's uniform gain. Every random draw comes from a stream
/// keyed by `(replication, agent, purpose)`, so changing one agent's
/// strategy leaves everyone's valuations and matchings unchanged.
pub fn run_population<O: Observer>(
    setup: &PopulationSetup,
    agents: &[AgentSpec],
    contract: &RngContract,
    replication: u64,
    mut observer: O,
) -> Result<Vec<AgentState>> {
    let mech = &setup.mechanism;
    mech.validate()?;
    let n = mech.n_agents;
    if agents.len() != n {
        return Err(Error::DimensionMismatch(format!("{} agent specs for {} agents", agents.len(), n)));
    }
    for a in agents {
        a.params.validate()?;
        a.strategy.validate()?;
        a.valuation.validate()?;
    }
    let matcher = Matcher::new(&setup.matching, n, mech.n_auctions)?;
    let horizon = mech.horizon;
    let delta = mech.time_saving;

    let mut val_rng: Vec<RngStream> =
        (0..n).map(|i| contract.stream(replication, i as u64, StreamPurpose::Valuation)).collect();
    let mut match_rng: Vec<RngStream> =
        (0..n).map(|i| contract.stream(replication, i as u64, StreamPurpose::Matching)).collect();
    let mut tie_rng = contract.stream(replication, POPULATION, StreamPurpose::TieBreak);

    let fixed_eps: Vec<Option<f64>> =
        agents.iter().map(|a| a.params.step_size.is_constant().then(|| a.params.step_size.at(1, horizon))).collect();

    let mut state: Vec<AgentState> = agents.iter().map(|a| AgentState::new(&a.params)).collect();
    let mut next = state.clone();
    let mut valuations = vec![0.0; n];
    let mut bids = vec![0.0; n];
    let mut assignment = vec![0usize; n];
    let mut priority = vec![0u64; n];
    let mut gains = vec![0.0; n];
    let mut costs = vec![0.0; n];
    let mut saved = vec![0.0; n];
    let mut clearing = Clearing::new();
    let mut outcome = PeriodOutcome::default();

    for t in 1..=horizon {
        for i in 0..n {
            valuations[i] = agents[i].valuation.sample(&mut val_rng[i]);
            bids[i] = agents[i].strategy.bid(&state[i], valuations[i], &agents[i].params, delta);
        }
        for i in 0..n {
            assignment[i] = matcher.assign(i, &mut match_rng[i]);
            priority[i] = tie_rng.random();
        }
        clearing.clear(&bids, &assignment, &priority, mech.capacity, mech.n_auctions, &mut outcome);
        let g = if setup.redistribute { outcome.gain } else { 0.0 };
        gains.fill(g);
        for i in 0..n {
            let a = &agents[i];
            let eps = fixed_eps[i].unwrap_or_else(|| a.params.step_size.at(t, horizon));
            next[i] = a.strategy.update(&state[i], outcome.payments[i], g, eps, &a.params);
            (costs[i], saved[i]) = cost_and_saved(valuations[i], outcome.winners[i], delta);
        }
        observer.on_round(&RoundView {
            t,
            horizon,
            before: &state,
            valuations: &valuations,
            bids: &bids,
            winners: &outcome.winners,
            payments: &outcome.payments,
            gains: &gains,
            competing_hi: &outcome.competing_hi,
            competing_lo: &outcome.competing_lo,
            costs: &costs,
            saved: &saved,
            after: &next,
        });
        std::mem::swap(&mut state, &mut next);
    }
    observer.on_finish(&state);
    Ok(state)
}
