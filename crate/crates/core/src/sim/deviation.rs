use serde::{Deserialize, Serialize};

use super::observers::SamplePathCollector;
use super::population::{run_population, AgentSpec, PopulationSetup};
use super::TraceRecorder;
use crate::error::{Error, Result};
use crate::hindsight::{solve_fractional, HindsightInstance};
use crate::rng::RngContract;
use crate::strategy::StrategyKind;

/// Paired comparison of one agent's cost with and without deviating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationOutcome {
    pub base_cost: f64,
    pub deviant_cost: f64,
    /// `(base_cost - deviant_cost) / T`; positive when deviating pays off.
    pub gain_per_period: f64,
    /// Whether the two runs produced identical traces.
    pub identical: bool,
}

/// Rounds the baseline agent would win in the relaxed hindsight problem.
///
/// The budget is the agent's initial karma plus every gain it actually
/// received on the baseline path; only rounds taken in full are planned.
pub fn hindsight_replay_plan(path: &SamplePathCollector, initial_karma: f64, time_saving: f64) -> Result<Vec<bool>> {
    let inst = HindsightInstance {
        valuations: path.valuations.clone(),
        competing: path.competing.clone(),
        time_saving,
        budget: initial_karma + path.gains.iter().sum::<f64>(),
        gain_share: 0.0,
    };
    let sol = solve_fractional(&inst)?;
    Ok(sol.fractional_plan.iter().map(|&x| x >= 1.0).collect())
}

/// Runs the population twice on the same random streams: once as given,
/// once with agent `deviator` switched to `deviation`.
///
/// A `Hindsight` deviation with an empty plan is replaced by the replay plan
/// of the baseline path.
pub fn run_deviation(
    setup: &PopulationSetup,
    population: &[AgentSpec],
    deviator: usize,
    deviation: &StrategyKind,
    contract: &RngContract,
    replication: u64,
) -> Result<DeviationOutcome> {
    let mut out =
        run_deviation_family(setup, population, deviator, std::slice::from_ref(deviation), contract, replication)?;
    Ok(out.remove(0))
}

/// Like [`run_deviation`] for several deviations sharing one baseline run.
pub fn run_deviation_family(
    setup: &PopulationSetup,
    population: &[AgentSpec],
    deviator: usize,
    deviations: &[StrategyKind],
    contract: &RngContract,
    replication: u64,
) -> Result<Vec<DeviationOutcome>> {
    if deviator >= population.len() {
        return Err(Error::DimensionMismatch(format!("deviator {deviator} out of range")));
    }
    let horizon = setup.mechanism.horizon;
    let record = population.len() * horizon <= 1 << 16;
    let mut base_path = SamplePathCollector::new(deviator);
    let mut base_rec = TraceRecorder::new();
    if record {
        run_population(setup, population, contract, replication, (&mut base_path, &mut base_rec))?;
    } else {
        run_population(setup, population, contract, replication, &mut base_path)?;
    }
    let base_trace = record.then(|| base_rec.into_trace());

    let mut deviants = population.to_vec();
    let mut outcomes = Vec::with_capacity(deviations.len());
    for deviation in deviations {
        deviants[deviator].strategy = match deviation {
            StrategyKind::Hindsight { plan } if plan.is_empty() => StrategyKind::Hindsight {
                plan: hindsight_replay_plan(
                    &base_path,
                    population[deviator].params.initial_karma,
                    setup.mechanism.time_saving,
                )?,
            },
            other => other.clone(),
        };
        let mut dev_path = SamplePathCollector::new(deviator);
        let identical = match &base_trace {
            Some(base) => {
                let mut rec = TraceRecorder::new();
                run_population(setup, &deviants, contract, replication, (&mut dev_path, &mut rec))?;
                rec.into_trace() == *base
            }
            None => {
                run_population(setup, &deviants, contract, replication, &mut dev_path)?;
                false
            }
        };
        outcomes.push(DeviationOutcome {
            base_cost: base_path.cost,
            deviant_cost: dev_path.cost,
            gain_per_period: (base_path.cost - dev_path.cost) / horizon as f64,
            identical,
        });
    }
    Ok(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::ValuationModel;
    use crate::params::{AgentParams, MechanismParams, StepSchedule};

    fn population(n: usize) -> Vec<AgentSpec> {
        (0..n)
            .map(|i| AgentSpec {
                params: AgentParams {
                    initial_karma: 30.0,
                    initial_multiplier: if i % 2 == 0 { 5.0 } else { 6.0 },
                    mu_lo: 0.1,
                    mu_hi: 1000.0,
                    step_size: StepSchedule::Fixed { eps: 0.05 },
                    target_rate: 0.0,
                },
                strategy: StrategyKind::KarmaPacing,
                valuation: ValuationModel::unit_uniform(),
            })
            .collect()
    }

    fn setup(n: usize) -> PopulationSetup {
        PopulationSetup::single_auction(MechanismParams { n_agents: n, capacity: 2, n_auctions: 1, time_saving: 5.0, horizon: 300 })
    }

    #[test]
    fn self_deviation_is_exactly_neutral() {
        let out =
            run_deviation(&setup(10), &population(10), 3, &StrategyKind::KarmaPacing, &RngContract::new(2), 0).unwrap();
        assert_eq!(out.gain_per_period, 0.0);
        assert!(out.identical);
    }

    #[test]
    fn other_deviation_changes_the_path() {
        let dev = StrategyKind::ScaledDeviation { factor: 2.0, base: Box::new(StrategyKind::KarmaPacing) };
        let out = run_deviation(&setup(10), &population(10), 3, &dev, &RngContract::new(2), 0).unwrap();
        assert!(!out.identical);
        assert!(out.gain_per_period.is_finite());
    }

    #[test]
    fn family_matches_single_runs() {
        let family = vec![
            StrategyKind::KarmaPacing,
            StrategyKind::TruthfulCapped { multiplier: 5.5 },
            StrategyKind::Hindsight { plan: Vec::new() },
        ];
        let contract = RngContract::new(4);
        let joint = run_deviation_family(&setup(10), &population(10), 2, &family, &contract, 3).unwrap();
        for (dev, out) in family.iter().zip(&joint) {
            assert_eq!(*out, run_deviation(&setup(10), &population(10), 2, dev, &contract, 3).unwrap());
        }
        assert!(joint[0].identical && !joint[1].identical);
    }

    #[test]
    fn hindsight_replay_runs() {
        let dev = StrategyKind::Hindsight { plan: Vec::new() };
        let out = run_deviation(&setup(10), &population(10), 0, &dev, &RngContract::new(2), 1).unwrap();
        assert!(out.deviant_cost.is_finite());
    }
}
