//! Declarative experiment configuration.
//!
//! A spec is a TOML file with one `[agent]` template, an optional `[market]`
//! (single agent against stationary competition) or `[population]` (many
//! learning agents), and a list of `[[series]]` that override parts of the
//! template. Every series is swept over the same horizon grid.

use std::path::{Path, PathBuf};

use karma_core::metrics::Scaling;
use karma_core::sim::{AgentSpec, PopulationSetup, StationaryAgent};
use karma_core::{
    AgentParams, CompetingBidModel, MatchingModel, MechanismParams, StationaryMarket, StepSchedule, StrategyKind,
    ValuationModel,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    StationaryRegret,
    SimultaneousConvergence,
    ParallelNashGap,
    HittingTime,
    FixedBudgetVariableEps,
    DiscreteValuations,
    EpisodeComparison,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::StationaryRegret,
        ExperimentKind::SimultaneousConvergence,
        ExperimentKind::ParallelNashGap,
        ExperimentKind::HittingTime,
        ExperimentKind::FixedBudgetVariableEps,
        ExperimentKind::DiscreteValuations,
        ExperimentKind::EpisodeComparison,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::StationaryRegret => "stationary-regret",
            ExperimentKind::SimultaneousConvergence => "simultaneous-convergence",
            ExperimentKind::ParallelNashGap => "parallel-nash-gap",
            ExperimentKind::HittingTime => "hitting-time",
            ExperimentKind::FixedBudgetVariableEps => "fixed-budget-variable-eps",
            ExperimentKind::DiscreteValuations => "discrete-valuations",
            ExperimentKind::EpisodeComparison => "episode-comparison",
        }
    }

    /// Environment the kind runs in when the spec does not say.
    fn default_setting(self) -> Option<Setting> {
        match self {
            ExperimentKind::StationaryRegret | ExperimentKind::EpisodeComparison => Some(Setting::Stationary),
            ExperimentKind::DiscreteValuations => None,
            _ => Some(Setting::Population),
        }
    }
}

/// Which engine drives the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setting {
    /// One agent facing i.i.d. competing bids.
    Stationary,
    /// A population of learning agents.
    Population,
}

/// `coefficient * T^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingRule {
    pub coefficient: f64,
    #[serde(default)]
    pub exponent: f64,
}

impl ScalingRule {
    pub fn at(&self, horizon: usize) -> f64 {
        self.coefficient * (horizon as f64).powf(self.exponent)
    }
}

/// Stationary competition faced by a single agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSpec {
    pub competing: CompetingBidModel,
    /// Share of the price redistributed to the agent.
    pub gain_share: f64,
    #[serde(default = "default_time_saving")]
    pub time_saving: f64,
}

/// Population-level mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub n_agents: usize,
    /// Winners per auction.
    pub capacity: usize,
    #[serde(default = "one")]
    pub n_auctions: usize,
    #[serde(default = "default_time_saving")]
    pub time_saving: f64,
    #[serde(default = "uniform_matching")]
    pub matching: MatchingModel,
    #[serde(default = "yes")]
    pub redistribute: bool,
}

/// Agent template shared by every series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentTemplate {
    pub strategy: StrategyKind,
    #[serde(default = "ValuationModel::unit_uniform")]
    pub valuation: ValuationModel,
    /// Initial multipliers, spread over equal contiguous groups of agents.
    pub initial_multipliers: Vec<f64>,
    #[serde(default = "default_mu_lo")]
    pub mu_lo: f64,
    #[serde(default = "default_mu_hi")]
    pub mu_hi: f64,
    /// Initial karma `k1(T)`.
    pub budget: ScalingRule,
    pub step_size: StepSchedule,
    /// Target expenditure rate; defaults to `k1 / T`.
    #[serde(default)]
    pub target_rate: Option<f64>,
}

/// Overrides applied on top of the template for one curve.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesSpec {
    pub label: String,
    pub strategy: Option<StrategyKind>,
    pub valuation: Option<ValuationModel>,
    pub competing: Option<CompetingBidModel>,
    pub gain_share: Option<f64>,
    pub initial_multipliers: Option<Vec<f64>>,
    pub budget: Option<ScalingRule>,
    pub step_size: Option<StepSchedule>,
    pub target_rate: Option<f64>,
    pub n_agents: Option<usize>,
    pub n_auctions: Option<usize>,
    pub capacity: Option<usize>,
}

/// Reference profile for convergence distances.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetProfile {
    /// Mean of the initial multipliers, the stationary profile of a
    /// symmetric population on the multiplier-sum hyperplane.
    #[default]
    Symmetric,
    /// Mean final profile of the runs at the largest horizon.
    LargestHorizon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub kind: ExperimentKind,
    #[serde(default)]
    pub description: String,
    pub seed: u64,
    pub replications: usize,
    pub horizons: Vec<usize>,
    #[serde(default)]
    pub setting: Option<Setting>,
    #[serde(default)]
    pub market: Option<MarketSpec>,
    #[serde(default)]
    pub population: Option<PopulationSpec>,
    pub agent: AgentTemplate,
    #[serde(default)]
    pub series: Vec<SeriesSpec>,
    #[serde(default)]
    pub target: TargetProfile,
    /// Alternative strategies tried by one agent in the Nash-gap experiment.
    #[serde(default)]
    pub deviations: Vec<StrategyKind>,
    /// Rounds averaged for the end-of-episode multiplier.
    #[serde(default = "default_tail")]
    pub tail_rounds: usize,
    /// Sampling period of the episode paths.
    #[serde(default = "one")]
    pub record_every: usize,
    /// Output directory, relative to the working directory.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn one() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn default_time_saving() -> f64 {
    5.0
}
fn default_mu_lo() -> f64 {
    0.1
}
fn default_mu_hi() -> f64 {
    1000.0
}
fn default_tail() -> usize {
    250
}
fn uniform_matching() -> MatchingModel {
    MatchingModel::UniformRandom
}

/// One fully resolved curve of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub label: String,
    pub strategy: StrategyKind,
    pub valuation: ValuationModel,
    pub initial_multipliers: Vec<f64>,
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub budget: ScalingRule,
    pub step_size: StepSchedule,
    pub target_rate: Option<f64>,
    pub market: Option<MarketSpec>,
    pub population: Option<PopulationSpec>,
}

impl Scenario {
    /// Short digest of the horizon-independent configuration.
    pub fn param_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("scenario serializes");
        let digest = Sha256::digest(&json);
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    pub fn agent_params(&self, index: usize, n_agents: usize, horizon: usize) -> AgentParams {
        let groups = self.initial_multipliers.len();
        let group = (index * groups / n_agents.max(1)).min(groups - 1);
        let initial_karma = self.budget.at(horizon);
        AgentParams {
            initial_karma,
            initial_multiplier: self.initial_multipliers[group],
            mu_lo: self.mu_lo,
            mu_hi: self.mu_hi,
            step_size: self.step_size,
            target_rate: self.target_rate.unwrap_or(initial_karma / horizon as f64),
        }
    }

    pub fn stationary(&self, horizon: usize) -> CliResult<(StationaryMarket, StationaryAgent)> {
        let m = self.market.as_ref().ok_or_else(|| CliError::Config("stationary setting needs [market]".into()))?;
        let market = StationaryMarket {
            valuation: self.valuation.clone(),
            competing: m.competing.clone(),
            gain_share: m.gain_share,
            time_saving: m.time_saving,
        };
        let agent = StationaryAgent { params: self.agent_params(0, 1, horizon), strategy: self.strategy.clone() };
        Ok((market, agent))
    }

    pub fn population(&self, horizon: usize) -> CliResult<(PopulationSetup, Vec<AgentSpec>)> {
        let p =
            self.population.as_ref().ok_or_else(|| CliError::Config("population setting needs [population]".into()))?;
        let setup = PopulationSetup {
            mechanism: MechanismParams {
                n_agents: p.n_agents,
                capacity: p.capacity,
                n_auctions: p.n_auctions,
                time_saving: p.time_saving,
                horizon,
            },
            matching: p.matching.clone(),
            redistribute: p.redistribute,
        };
        let agents = (0..p.n_agents)
            .map(|i| AgentSpec {
                params: self.agent_params(i, p.n_agents, horizon),
                strategy: self.strategy.clone(),
                valuation: self.valuation.clone(),
            })
            .collect();
        Ok((setup, agents))
    }

    pub fn time_saving(&self) -> f64 {
        match (&self.market, &self.population) {
            (Some(m), _) => m.time_saving,
            (None, Some(p)) => p.time_saving,
            (None, None) => default_time_saving(),
        }
    }

    /// Largest bid any agent can place, `delta * v_max / mu_lo`.
    pub fn max_bid(&self) -> f64 {
        self.time_saving() * self.valuation.support_max().unwrap_or(f64::INFINITY) / self.mu_lo
    }

    pub fn scaling(&self) -> Scaling {
        let step_exponent = match self.step_size {
            StepSchedule::HorizonPower { exponent, .. } => Some(exponent),
            StepSchedule::Fixed { .. } => Some(0.0),
            StepSchedule::PowerLaw { .. } => None,
        };
        Scaling { budget_exponent: Some(self.budget.exponent), step_exponent }
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn setting(&self) -> CliResult<Setting> {
        match (self.setting, self.kind.default_setting()) {
            (Some(s), _) | (None, Some(s)) => Ok(s),
            (None, None) => Err(CliError::Config(format!("kind {} needs an explicit `setting`", self.kind.name()))),
        }
    }

    /// Horizons in ascending order without duplicates.
    pub fn horizons(&self) -> Vec<usize> {
        let mut h = self.horizons.clone();
        h.sort_unstable();
        h.dedup();
        h
    }

    pub fn scenarios(&self) -> Vec<Scenario> {
        let default = [SeriesSpec { label: "default".into(), ..SeriesSpec::default() }];
        let series: &[SeriesSpec] = if self.series.is_empty() { &default } else { &self.series };
        let a = &self.agent;
        series
            .iter()
            .map(|s| {
                let market = self.market.as_ref().map(|m| MarketSpec {
                    competing: s.competing.clone().unwrap_or_else(|| m.competing.clone()),
                    gain_share: s.gain_share.unwrap_or(m.gain_share),
                    time_saving: m.time_saving,
                });
                let population = self.population.as_ref().map(|p| PopulationSpec {
                    n_agents: s.n_agents.unwrap_or(p.n_agents),
                    n_auctions: s.n_auctions.unwrap_or(p.n_auctions),
                    capacity: s.capacity.unwrap_or(p.capacity),
                    ..p.clone()
                });
                Scenario {
                    label: s.label.clone(),
                    strategy: s.strategy.clone().unwrap_or_else(|| a.strategy.clone()),
                    valuation: s.valuation.clone().unwrap_or_else(|| a.valuation.clone()),
                    initial_multipliers: s.initial_multipliers.clone().unwrap_or_else(|| a.initial_multipliers.clone()),
                    mu_lo: a.mu_lo,
                    mu_hi: a.mu_hi,
                    budget: s.budget.unwrap_or(a.budget),
                    step_size: s.step_size.unwrap_or(a.step_size),
                    target_rate: s.target_rate.or(a.target_rate),
                    market,
                    population,
                }
            })
            .collect()
    }

    /// Structural checks that make a spec unrunnable.
    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return bad("horizons must be a non-empty list of positive integers".into());
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        let setting = self.setting()?;
        match setting {
            Setting::Stationary if self.market.is_none() => return bad("stationary setting needs [market]".into()),
            Setting::Population if self.population.is_none() => {
                return bad("population setting needs [population]".into())
            }
            _ => {}
        }
        let mut labels = std::collections::HashSet::new();
        for s in &self.series {
            if !labels.insert(s.label.as_str()) {
                return bad(format!("duplicate series label {:?}", s.label));
            }
        }
        if self.kind == ExperimentKind::ParallelNashGap && self.deviations.is_empty() {
            return bad("parallel-nash-gap needs at least one entry in `deviations`".into());
        }
        if self.kind == ExperimentKind::EpisodeComparison && self.tail_rounds == 0 {
            return bad("tail_rounds must be at least 1".into());
        }
        for d in &self.deviations {
            d.validate().map_err(|e| CliError::Config(format!("deviation {}: {e}", d.label())))?;
        }
        for sc in self.scenarios() {
            let ctx = |e: karma_core::Error| CliError::Config(format!("series {:?}: {e}", sc.label));
            if sc.initial_multipliers.is_empty() {
                return bad(format!("series {:?}: initial_multipliers is empty", sc.label));
            }
            if !(sc.budget.coefficient >= 0.0 && sc.budget.coefficient.is_finite() && sc.budget.exponent.is_finite()) {
                return bad(format!("series {:?}: budget rule must be finite and nonnegative", sc.label));
            }
            sc.strategy.validate().map_err(ctx)?;
            sc.valuation.validate().map_err(ctx)?;
            for &t in &self.horizons {
                match setting {
                    Setting::Stationary => {
                        let (market, agent) = sc.stationary(t)?;
                        market.validate().map_err(ctx)?;
                        agent.params.validate().map_err(ctx)?;
                    }
                    Setting::Population => {
                        let (setup, agents) = sc.population(t)?;
                        setup.mechanism.validate().map_err(ctx)?;
                        setup.matching.validate(setup.mechanism.n_agents, setup.mechanism.n_auctions).map_err(ctx)?;
                        for a in &agents {
                            a.params.validate().map_err(ctx)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
