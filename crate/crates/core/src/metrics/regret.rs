//! Regret against the hindsight benchmark and distance to a target profile.

use crate::error::{Error, Result};
use crate::hindsight::{solve_fractional, HindsightInstance};
use crate::sim::Trace;

/// `(realized cost - hindsight cost) / T` for a cost accumulated elsewhere.
pub fn regret_from_cost(realized_cost: f64, inst: &HindsightInstance) -> Result<f64> {
    let benchmark = solve_fractional(inst)?;
    Ok((realized_cost - benchmark.cost) / inst.horizon() as f64)
}

/// Average regret of `agent` in `trace` against the benchmark on its path.
pub fn regret_vs_hindsight(trace: &Trace, agent: usize, inst: &HindsightInstance) -> Result<f64> {
    if trace.rounds() != inst.horizon() {
        return Err(Error::DimensionMismatch(format!(
            "trace has {} rounds, benchmark has {}",
            trace.rounds(),
            inst.horizon()
        )));
    }
    regret_from_cost(trace.sample_path_cost(agent), inst)
}

/// Per-round `||mu_t - target||^2` and its time average.
pub fn convergence_distance(trace: &Trace, target: &[f64]) -> Result<(Vec<f64>, f64)> {
    if target.len() != trace.n_agents {
        return Err(Error::DimensionMismatch(format!(
            "target has {} entries for {} agents",
            target.len(),
            trace.n_agents
        )));
    }
    if trace.rounds() == 0 {
        return Err(Error::EmptyTrace);
    }
    let series: Vec<f64> = trace
        .multiplier
        .chunks(trace.n_agents)
        .map(|mu| mu.iter().zip(target).map(|(m, s)| (m - s).powi(2)).sum())
        .collect();
    let avg = series.iter().sum::<f64>() / series.len() as f64;
    Ok((series, avg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{CompetingBidModel, ValuationModel};
    use crate::params::{AgentParams, StationaryMarket, StepSchedule};
    use crate::rng::RngContract;
    use crate::sim::{run_stationary, StationaryAgent, TraceRecorder};
    use crate::strategy::StrategyKind;

    fn market(delta: f64) -> StationaryMarket {
        StationaryMarket {
            valuation: ValuationModel::unit_uniform(),
            competing: CompetingBidModel::IidPair { marginal: ValuationModel::unit_uniform(), price_setter_allowed: true },
            gain_share: 0.0,
            time_saving: delta,
        }
    }

    fn run(strategy: StrategyKind, delta: f64, horizon: usize) -> Trace {
        let agent = StationaryAgent {
            params: AgentParams {
                initial_karma: 0.2 * horizon as f64,
                initial_multiplier: 10.0,
                mu_lo: 0.1,
                mu_hi: 1000.0,
                step_size: StepSchedule::Fixed { eps: 0.4 },
                target_rate: 0.2,
            },
            strategy,
        };
        let mut rec = TraceRecorder::new();
        run_stationary(&market(delta), &agent, horizon, &RngContract::new(1), 0, &mut rec).unwrap();
        rec.into_trace()
    }

    #[test]
    fn never_bidding_has_nonnegative_regret() {
        let tr = run(StrategyKind::Hindsight { plan: vec![] }, 0.5, 200);
        let inst = tr.hindsight_instance(0, 40.0, 0.0, 0.5).unwrap();
        let r = regret_vs_hindsight(&tr, 0, &inst).unwrap();
        let vsum: f64 = inst.valuations.iter().sum();
        let exact = (vsum - solve_fractional(&inst).unwrap().cost) / 200.0;
        assert!(r >= 0.0);
        assert!((r - exact).abs() < 1e-12);
    }

    #[test]
    fn replaying_the_plan_is_nearly_optimal() {
        let probe = run(StrategyKind::AdaptivePacing, 5.0, 300);
        let inst = probe.hindsight_instance(0, 60.0, 0.0, 5.0).unwrap();
        let plan: Vec<bool> = solve_fractional(&inst).unwrap().fractional_plan.iter().map(|&x| x >= 1.0).collect();
        let tr = run(StrategyKind::Hindsight { plan }, 5.0, 300);
        assert_eq!(tr.column(&tr.competing_hi, 0), inst.competing);
        let r = regret_vs_hindsight(&tr, 0, &inst).unwrap();
        let vmax = inst.valuations.iter().cloned().fold(0.0, f64::max);
        assert!(r >= -1e-9 && r <= 5.0 * vmax / 300.0 + 1e-12, "{r}");
    }

    #[test]
    fn realized_cost_is_bounded_below() {
        let tr = run(StrategyKind::AdaptivePacing, 5.0, 1000);
        let inst = tr.hindsight_instance(0, 200.0, 0.0, 5.0).unwrap();
        assert!(regret_vs_hindsight(&tr, 0, &inst).unwrap() >= -1e-9);
    }

    #[test]
    fn distance_series() {
        let tr = run(StrategyKind::TruthfulCapped { multiplier: 3.0 }, 5.0, 10);
        let (series, avg) = convergence_distance(&tr, &[10.0]).unwrap();
        assert!(series.iter().all(|&d| d == 0.0));
        assert_eq!(avg, 0.0);
        assert!(convergence_distance(&tr, &[1.0, 2.0]).is_err());
    }
}
