//! Sweep execution: every (series, horizon, replication) task runs on a
//! bounded worker pool, then results are aggregated in grid order so the
//! output does not depend on scheduling.

use karma_core::hindsight::{solve_fractional, HindsightInstance};
use karma_core::metrics::{fit_loglog_slope, mean_ci, mean_profile, MeanCi, SlopeFit};
use karma_core::sim::{
    run_deviation_family, run_population, run_stationary, ConservationMonitor, Observer, PathPoint, PathRecorder,
    RoundView, SamplePathCollector, SummaryObserver,
};
use karma_core::strategy::HittingTracker;
use karma_core::{AgentState, RngContract, StrategyKind};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::spec::{ExperimentKind, ExperimentSpec, Scenario, Setting, TargetProfile};

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "KARMA_WORKERS";

/// One (series, horizon) cell of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub grid_id: usize,
    pub series: String,
    pub horizon: usize,
    pub param_hash: String,
    pub initial_karma: f64,
    /// Step size in the first round.
    pub initial_step: f64,
}

/// Aggregate of one statistic at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatRow {
    pub grid_id: usize,
    pub horizon: usize,
    pub param_hash: String,
    pub stat_name: String,
    pub ci: MeanCi,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeRow {
    pub series: String,
    pub stat_name: String,
    pub fit: SlopeFit,
}

/// One sampled point of an episode path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRow {
    pub series: String,
    pub point: PathPoint,
}

/// Everything an experiment produces.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepResult {
    pub grid: Vec<GridPoint>,
    pub stats: Vec<StatRow>,
    pub slopes: Vec<SlopeRow>,
    pub episodes: Vec<EpisodeRow>,
}

impl SweepResult {
    pub fn point(&self, series: &str, horizon: usize) -> Option<&GridPoint> {
        self.grid.iter().find(|g| g.series == series && g.horizon == horizon)
    }

    pub fn stat(&self, series: &str, horizon: usize, name: &str) -> Option<&MeanCi> {
        let id = self.point(series, horizon)?.grid_id;
        self.stats.iter().find(|s| s.grid_id == id && s.stat_name == name).map(|s| &s.ci)
    }

    /// `(T, statistic)` for every horizon of a series, in ascending `T`.
    pub fn series_stat(&self, series: &str, name: &str) -> Vec<(usize, MeanCi)> {
        self.grid
            .iter()
            .filter(|g| g.series == series)
            .filter_map(|g| self.stat(series, g.horizon, name).map(|ci| (g.horizon, *ci)))
            .collect()
    }

    pub fn slope(&self, series: &str, name: &str) -> Option<&SlopeFit> {
        self.slopes.iter().find(|s| s.series == series && s.stat_name == name).map(|s| &s.fit)
    }

    pub fn episode(&self, series: &str) -> Vec<PathPoint> {
        self.episodes.iter().filter(|e| e.series == series).map(|e| e.point).collect()
    }
}

/// Named per-replication statistics, in output order.
type Sample = Vec<(String, f64)>;

/// Raw output of one replication before cross-replication post-processing.
enum RepOutput {
    Stats(Sample),
    Population(PopulationRaw),
    Episode(Sample, Vec<PathPoint>),
}

/// Worker count from the environment, falling back to the machine size.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Independent base seed per horizon; every series at a given horizon
/// shares it, so series are compared on common random numbers.
fn horizon_seed(seed: u64, horizon: usize) -> u64 {
    let mut z = seed ^ (horizon as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn run_experiment(spec: &ExperimentSpec) -> CliResult<SweepResult> {
    run_experiment_with(spec, worker_count())
}

pub fn run_experiment_with(spec: &ExperimentSpec, workers: usize) -> CliResult<SweepResult> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))?;
    pool.install(|| execute(spec))
}

fn execute(spec: &ExperimentSpec) -> CliResult<SweepResult> {
    let setting = spec.setting()?;
    let scenarios = spec.scenarios();
    let horizons = spec.horizons();
    let mut grid = Vec::new();
    for sc in &scenarios {
        let hash = sc.param_hash();
        for &t in &horizons {
            let params = sc.agent_params(0, 1, t);
            grid.push(GridPoint {
                grid_id: grid.len(),
                series: sc.label.clone(),
                horizon: t,
                param_hash: hash.clone(),
                initial_karma: params.initial_karma,
                initial_step: params.step_size.at(1, t),
            });
        }
    }
    let tasks: Vec<(usize, u64)> =
        (0..grid.len()).flat_map(|g| (0..spec.replications as u64).map(move |r| (g, r))).collect();
    let n_h = horizons.len();
    let outputs: Vec<RepOutput> = tasks
        .par_iter()
        .map(|&(g, rep)| {
            let point = &grid[g];
            let sc = &scenarios[g / n_h];
            let contract = RngContract::new(horizon_seed(spec.seed, point.horizon));
            run_replication(spec, setting, sc, point.horizon, &contract, rep)
        })
        .collect::<CliResult<_>>()?;

    let mut per_point: Vec<Vec<RepOutput>> = (0..grid.len()).map(|_| Vec::new()).collect();
    for ((g, _), out) in tasks.iter().zip(outputs) {
        per_point[*g].push(out);
    }

    let targets = population_targets(spec, &scenarios, &per_point, n_h)?;
    let mut result = SweepResult { grid, ..SweepResult::default() };
    for (g, outs) in per_point.into_iter().enumerate() {
        let point = &result.grid[g];
        let mut samples = Vec::with_capacity(outs.len());
        for (rep, out) in outs.into_iter().enumerate() {
            match out {
                RepOutput::Stats(s) => samples.push(s),
                RepOutput::Population(raw) => samples.push(raw.stats(&targets[g / n_h])),
                RepOutput::Episode(s, path) => {
                    if rep == 0 {
                        result
                            .episodes
                            .extend(path.into_iter().map(|p| EpisodeRow { series: point.series.clone(), point: p }));
                    }
                    samples.push(s);
                }
            }
        }
        let rows = aggregate(point, &samples)?;
        result.stats.extend(rows);
    }
    result.slopes = fit_slopes(&result);
    Ok(result)
}

fn aggregate(point: &GridPoint, samples: &[Sample]) -> CliResult<Vec<StatRow>> {
    let Some(first) = samples.first() else { return Ok(Vec::new()) };
    first
        .iter()
        .enumerate()
        .map(|(j, (name, _))| {
            let xs: Vec<f64> = samples.iter().map(|s| s[j].1).collect();
            Ok(StatRow {
                grid_id: point.grid_id,
                horizon: point.horizon,
                param_hash: point.param_hash.clone(),
                stat_name: name.clone(),
                ci: mean_ci(&xs)?,
            })
        })
        .collect()
}

/// Log-log slope of every statistic whose means are positive on at least
/// three horizons of a series.
fn fit_slopes(result: &SweepResult) -> Vec<SlopeRow> {
    let mut out = Vec::new();
    let mut series: Vec<&str> = Vec::new();
    for g in &result.grid {
        if !series.contains(&g.series.as_str()) {
            series.push(&g.series);
        }
    }
    for s in series {
        let first = result.grid.iter().find(|g| g.series == s).map(|g| g.grid_id);
        let names: Vec<&str> =
            result.stats.iter().filter(|r| Some(r.grid_id) == first).map(|r| r.stat_name.as_str()).collect();
        for name in names {
            let pts: Vec<(f64, f64)> =
                result.series_stat(s, name).into_iter().map(|(t, ci)| (t as f64, ci.mean)).collect();
            if let Ok(fit) = fit_loglog_slope(&pts) {
                out.push(SlopeRow { series: s.to_string(), stat_name: name.to_string(), fit });
            }
        }
    }
    out
}

fn run_replication(
    spec: &ExperimentSpec,
    setting: Setting,
    sc: &Scenario,
    horizon: usize,
    contract: &RngContract,
    rep: u64,
) -> CliResult<RepOutput> {
    match (spec.kind, setting) {
        (ExperimentKind::EpisodeComparison, _) => episode_rep(spec, sc, horizon, contract, rep),
        (ExperimentKind::ParallelNashGap, _) => nash_rep(spec, sc, horizon, contract, rep),
        (_, Setting::Stationary) => stationary_rep(sc, horizon, contract, rep),
        (_, Setting::Population) => population_rep(sc, horizon, contract, rep),
    }
}

/// Share of the competing bid credited in the hindsight benchmark: the
/// adaptive pacing benchmark ignores gains.
fn benchmark_share(strategy: &StrategyKind, gain_share: f64) -> f64 {
    match strategy {
        StrategyKind::AdaptivePacing => 0.0,
        _ => gain_share,
    }
}

fn tracker(sc: &Scenario, params: &karma_core::AgentParams) -> HittingTracker {
    HittingTracker::new(sc.max_bid(), params.mu_lo, params.mu_hi)
}

fn stationary_rep(sc: &Scenario, horizon: usize, contract: &RngContract, rep: u64) -> CliResult<RepOutput> {
    let (market, agent) = sc.stationary(horizon)?;
    let mut path = SamplePathCollector::new(0);
    let mut summary = SummaryObserver::new(vec![tracker(sc, &agent.params)]);
    let last = run_stationary(&market, &agent, horizon, contract, rep, (&mut path, &mut summary))?;
    let s = summary.summaries().swap_remove(0);
    let inst = HindsightInstance {
        valuations: path.valuations,
        competing: path.competing,
        time_saving: market.time_saving,
        budget: agent.params.initial_karma,
        gain_share: benchmark_share(&agent.strategy, market.gain_share),
    };
    let benchmark = solve_fractional(&inst)?;
    let t = horizon as f64;
    Ok(RepOutput::Stats(vec![
        ("regret".into(), (s.cost - benchmark.cost) / t),
        ("hitting_time_fraction".into(), s.hitting.overall as f64 / t),
        ("final_multiplier".into(), last.multiplier),
        ("saved_per_round".into(), s.saved / t),
    ]))
}

/// Running sums of each agent's start-of-round multiplier, enough to
/// evaluate the time-averaged squared distance to any target afterwards.
struct MultiplierMoments {
    sum: Vec<f64>,
    sum_sq: f64,
    rounds: usize,
}

impl Observer for MultiplierMoments {
    fn on_round(&mut self, view: &RoundView<'_>) {
        for (acc, s) in self.sum.iter_mut().zip(view.before) {
            *acc += s.multiplier;
            self.sum_sq += s.multiplier * s.multiplier;
        }
        self.rounds += 1;
    }
}

struct PopulationRaw {
    moments: MultiplierMoments,
    final_multipliers: Vec<f64>,
    min_hitting: usize,
    horizon: usize,
    karma_drift: f64,
    multiplier_drift: f64,
    conserves_multipliers: bool,
}

impl PopulationRaw {
    fn stats(&self, target: &[f64]) -> Sample {
        let m = &self.moments;
        let rounds = m.rounds as f64;
        let cross: f64 = m.sum.iter().zip(target).map(|(s, x)| s * x).sum();
        let norm: f64 = target.iter().map(|x| x * x).sum();
        let distance = ((m.sum_sq - 2.0 * cross) / rounds + norm).max(0.0);
        let final_distance: f64 = self.final_multipliers.iter().zip(target).map(|(m, x)| (m - x).powi(2)).sum();
        let n = self.final_multipliers.len() as f64;
        let t = self.horizon as f64;
        let mut out = vec![
            ("distance".to_string(), distance),
            ("final_distance".to_string(), final_distance),
            ("final_mean_multiplier".to_string(), self.final_multipliers.iter().sum::<f64>() / n),
            ("hitting_time_fraction".to_string(), self.min_hitting as f64 / t),
            ("full_horizon".to_string(), if self.min_hitting == self.horizon { 1.0 } else { 0.0 }),
            ("karma_drift".to_string(), self.karma_drift),
        ];
        if self.conserves_multipliers {
            out.push(("multiplier_drift".to_string(), self.multiplier_drift));
        }
        out
    }
}

fn population_rep(sc: &Scenario, horizon: usize, contract: &RngContract, rep: u64) -> CliResult<RepOutput> {
    let (setup, agents) = sc.population(horizon)?;
    let n = agents.len();
    let mut moments = MultiplierMoments { sum: vec![0.0; n], sum_sq: 0.0, rounds: 0 };
    let mut summary = SummaryObserver::new(agents.iter().map(|a| tracker(sc, &a.params)).collect());
    let mut monitor = ConservationMonitor::new();
    let finals: Vec<AgentState> =
        run_population(&setup, &agents, contract, rep, (&mut moments, &mut summary, &mut monitor))?;
    let min_hitting = summary.summaries().iter().map(|s| s.hitting.overall).min().unwrap_or(0);
    Ok(RepOutput::Population(PopulationRaw {
        moments,
        final_multipliers: finals.iter().map(|s| s.multiplier).collect(),
        min_hitting,
        horizon,
        karma_drift: monitor.max_karma_drift,
        multiplier_drift: monitor.max_multiplier_drift,
        conserves_multipliers: setup.redistribute && sc.strategy == StrategyKind::KarmaPacing,
    }))
}

/// Target profile of each scenario for the distance statistics.
fn population_targets(
    spec: &ExperimentSpec,
    scenarios: &[Scenario],
    per_point: &[Vec<RepOutput>],
    n_h: usize,
) -> CliResult<Vec<Vec<f64>>> {
    scenarios
        .iter()
        .enumerate()
        .map(|(i, sc)| {
            let n = sc.population.as_ref().map_or(1, |p| p.n_agents);
            match spec.target {
                TargetProfile::Symmetric => {
                    let mean: f64 = (0..n).map(|a| sc.agent_params(a, n, 1).initial_multiplier).sum::<f64>() / n as f64;
                    Ok(vec![mean; n])
                }
                TargetProfile::LargestHorizon => {
                    let last = &per_point[i * n_h + n_h - 1];
                    let profiles: Vec<Vec<f64>> = last
                        .iter()
                        .filter_map(|o| match o {
                            RepOutput::Population(raw) => Some(raw.final_multipliers.clone()),
                            _ => None,
                        })
                        .collect();
                    if profiles.is_empty() {
                        Ok(vec![0.0; n])
                    } else {
                        Ok(mean_profile(&profiles)?)
                    }
                }
            }
        })
        .collect()
}

fn nash_rep(
    spec: &ExperimentSpec,
    sc: &Scenario,
    horizon: usize,
    contract: &RngContract,
    rep: u64,
) -> CliResult<RepOutput> {
    let (setup, agents) = sc.population(horizon)?;
    let mut family = vec![sc.strategy.clone()];
    family.extend(spec.deviations.iter().cloned());
    let outcomes = run_deviation_family(&setup, &agents, 0, &family, contract, rep)?;
    let mut out: Sample = vec![("self_gain".into(), outcomes[0].gain_per_period)];
    let mut best = f64::NEG_INFINITY;
    for (dev, o) in spec.deviations.iter().zip(&outcomes[1..]) {
        out.push((format!("gain_{}", dev.label()), o.gain_per_period));
        best = best.max(o.gain_per_period);
    }
    out.push(("max_gain".into(), best));
    out.push(("base_cost_per_round".into(), outcomes[0].base_cost / horizon as f64));
    Ok(RepOutput::Stats(out))
}

fn episode_rep(
    spec: &ExperimentSpec,
    sc: &Scenario,
    horizon: usize,
    contract: &RngContract,
    rep: u64,
) -> CliResult<RepOutput> {
    let (market, agent) = sc.stationary(horizon)?;
    let mut every = PathRecorder::new(vec![0], 1);
    let mut path = SamplePathCollector::new(0);
    run_stationary(&market, &agent, horizon, contract, rep, (&mut every, &mut path))?;
    let points = std::mem::take(&mut every.paths[0]);
    let mu: Vec<f64> = points.iter().map(|p| p.multiplier).collect();
    let tail = &mu[mu.len().saturating_sub(spec.tail_rounds)..];
    let first_zero = mu.iter().position(|&m| m <= 0.0).map_or(0, |i| i + 1);
    let zero_share = match first_zero {
        0 => 0.0,
        f => mu[f - 1..].iter().filter(|&&m| m <= 0.0).count() as f64 / (mu.len() - f + 1) as f64,
    };
    let inst = HindsightInstance {
        valuations: path.valuations,
        competing: path.competing,
        time_saving: market.time_saving,
        budget: agent.params.initial_karma,
        gain_share: market.gain_share,
    };
    let benchmark = solve_fractional(&inst)?;
    let hindsight_saved: f64 =
        benchmark.fractional_plan.iter().zip(&inst.valuations).map(|(x, v)| x * market.time_saving * v).sum();
    let last = points.last().copied().expect("horizon is positive");
    let stats = vec![
        ("cumulative_saved".into(), last.cumulative_saved),
        ("hindsight_saved".into(), hindsight_saved),
        ("final_multiplier".into(), last.multiplier),
        ("tail_mean_multiplier".into(), tail.iter().sum::<f64>() / tail.len() as f64),
        ("tail_min_multiplier".into(), tail.iter().cloned().fold(f64::INFINITY, f64::min)),
        ("tail_max_multiplier".into(), tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max)),
        ("first_zero_round".into(), first_zero as f64),
        ("zero_share_after_first_zero".into(), zero_share),
        ("final_karma".into(), last.karma),
    ];
    let sampled = points.into_iter().filter(|p| p.t % spec.record_every == 0 || p.t == horizon).collect();
    Ok(RepOutput::Episode(stats, sampled))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_across_horizons() {
        assert_ne!(horizon_seed(1, 100), horizon_seed(1, 316));
        assert_ne!(horizon_seed(1, 100), horizon_seed(2, 100));
        assert_eq!(horizon_seed(7, 1000), horizon_seed(7, 1000));
    }

    #[test]
    fn moments_reproduce_direct_distance() {
        let mut m = MultiplierMoments { sum: vec![0.0; 2], sum_sq: 0.0, rounds: 0 };
        let rows = [[1.0, 2.0], [3.0, 5.0], [4.0, 4.0]];
        let target = [2.5, 3.5];
        for r in &rows {
            for (acc, x) in m.sum.iter_mut().zip(r) {
                *acc += x;
                m.sum_sq += x * x;
            }
            m.rounds += 1;
        }
        let raw = PopulationRaw {
            moments: m,
            final_multipliers: vec![4.0, 4.0],
            min_hitting: 3,
            horizon: 3,
            karma_drift: 0.0,
            multiplier_drift: 0.0,
            conserves_multipliers: false,
        };
        let direct: f64 =
            rows.iter().map(|r| r.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).sum::<f64>() / 3.0;
        let stats = raw.stats(&target);
        assert!((stats[0].1 - direct).abs() < 1e-12);
        assert_eq!(stats[4].1, 1.0);
    }
}
