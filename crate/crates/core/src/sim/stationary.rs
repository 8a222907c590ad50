use serde::{Deserialize, Serialize};

use super::{Observer, RoundView};
use crate::auction::cost_and_saved;
use crate::error::{invalid, Result};
use crate::params::{AgentParams, StationaryMarket};
use crate::rng::{RngContract, StreamPurpose};
use crate::strategy::{AgentState, StrategyKind};

/// A single learning agent facing stationary competition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryAgent {
    pub params: AgentParams,
    pub strategy: StrategyKind,
}

/// Runs one agent against i.i.d. competing bids for `horizon` rounds.
///
/// Each round the agent wins iff its bid exceeds the lowest winning
/// competing bid `d_hi`, pays `d_hi` when it wins, and receives the gain
/// share of the price its bid induces. Valuations and competing bids come
/// from separate streams of `replication`, so two runs with different
/// strategies see the same environment.
pub fn run_stationary<O: Observer>(
    market: &StationaryMarket,
    agent: &StationaryAgent,
    horizon: usize,
    contract: &RngContract,
    replication: u64,
    mut observer: O,
) -> Result<AgentState> {
    market.validate()?;
    agent.params.validate()?;
    agent.strategy.validate()?;
    if horizon == 0 {
        return Err(invalid("horizon must be at least one round"));
    }
    let mut val_rng = contract.stream(replication, 0, StreamPurpose::Valuation);
    let mut comp_rng = contract.stream(replication, 0, StreamPurpose::CompetingBids);
    let delta = market.time_saving;
    let params = &agent.params;

    let mut state = [AgentState::new(params)];
    for t in 1..=horizon {
        let v = market.valuation.sample(&mut val_rng);
        let d = market.competing.sample(&mut comp_rng);
        let b = agent.strategy.bid(&state[0], v, params, delta);
        let won = b > d.hi;
        let z = if won { d.hi } else { 0.0 };
        let g = market.gain(b, d.hi, d.lo);
        let eps = params.step_size.at(t, horizon);
        let next = [agent.strategy.update(&state[0], z, g, eps, params)];
        let (c, s) = cost_and_saved(v, won, delta);
        observer.on_round(&RoundView {
            t,
            horizon,
            before: &state,
            valuations: &[v],
            bids: &[b],
            winners: &[won],
            payments: &[z],
            gains: &[g],
            competing_hi: &[d.hi],
            competing_lo: &[d.lo],
            costs: &[c],
            saved: &[s],
            after: &next,
        });
        state = next;
    }
    observer.on_finish(&state);
    Ok(state[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{CompetingBidModel, ValuationModel};
    use crate::params::StepSchedule;
    use crate::sim::TraceRecorder;

    fn market(share: f64, competing: CompetingBidModel) -> StationaryMarket {
        StationaryMarket { valuation: ValuationModel::Constant { value: 1.0 }, competing, gain_share: share, time_saving: 5.0 }
    }

    fn agent(mu: f64, strategy: StrategyKind) -> StationaryAgent {
        StationaryAgent {
            params: AgentParams {
                initial_karma: 10.0,
                initial_multiplier: mu,
                mu_lo: 0.1,
                mu_hi: 1000.0,
                step_size: StepSchedule::Fixed { eps: 0.01 },
                target_rate: 0.0,
            },
            strategy,
        }
    }

    #[test]
    fn losing_agent_collects_the_floor_price() {
        let m = market(0.1, CompetingBidModel::Empirical { pairs: vec![[0.5, 0.5]] });
        let mut rec = TraceRecorder::new();
        run_stationary(&m, &agent(100.0, StrategyKind::KarmaPacing), 20, &RngContract::new(1), 0, &mut rec).unwrap();
        let tr = rec.into_trace();
        assert!(tr.gain.iter().all(|&g| (g - 0.05).abs() < 1e-15));
        assert!(tr.karma.windows(2).all(|w| w[1] > w[0]));
        assert!(tr.multiplier.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn price_setter_gain() {
        // Bid 5 / 8 = 0.625 falls between the two competing bids.
        let m = market(0.1, CompetingBidModel::Empirical { pairs: vec![[0.7, 0.3]] });
        let mut rec = TraceRecorder::new();
        let mut a = agent(8.0, StrategyKind::TruthfulCapped { multiplier: 8.0 });
        a.params.initial_multiplier = 8.0;
        run_stationary(&m, &a, 3, &RngContract::new(1), 0, &mut rec).unwrap();
        let tr = rec.into_trace();
        assert!(tr.gain.iter().all(|&g| (g - 0.0625).abs() < 1e-15));
        assert!(tr.won.iter().all(|w| !w));
    }

    #[test]
    fn deterministic_replay() {
        let m = StationaryMarket {
            valuation: ValuationModel::unit_uniform(),
            competing: CompetingBidModel::IidPair { marginal: ValuationModel::unit_uniform(), price_setter_allowed: true },
            gain_share: 0.1,
            time_saving: 5.0,
        };
        let run = || {
            let mut rec = TraceRecorder::new();
            run_stationary(&m, &agent(5.0, StrategyKind::KarmaPacing), 500, &RngContract::new(9), 3, &mut rec).unwrap();
            rec.into_trace()
        };
        assert_eq!(run(), run());
    }
}
