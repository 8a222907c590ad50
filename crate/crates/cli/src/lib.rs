//! Experiment harness for the karma auction simulator: TOML specs, a
//! parallel sweep runner and CSV/JSON outputs.

pub mod error;
pub mod output;
pub mod runner;
pub mod spec;

use std::collections::BTreeMap;
use std::path::Path;

use karma_core::metrics::{check_assumptions, fit_loglog_slope, AssumptionContext, AssumptionReport, SlopeFit};

pub use error::{CliError, CliResult};
pub use output::{read_results, write_outputs, ResultRecord};
pub use runner::{run_experiment, run_experiment_with, worker_count, SweepResult, WORKERS_ENV};
pub use spec::{ExperimentKind, ExperimentSpec, Scenario, Setting};

/// Specs shipped in the `experiments/` directory.
pub const BUNDLED: [(&str, &str); 10] = [
    ("fig1a", include_str!("../../../experiments/fig1a.toml")),
    ("fig1b", include_str!("../../../experiments/fig1b.toml")),
    ("fig1c", include_str!("../../../experiments/fig1c.toml")),
    ("fig1d", include_str!("../../../experiments/fig1d.toml")),
    ("fig2a", include_str!("../../../experiments/fig2a.toml")),
    ("fig2b", include_str!("../../../experiments/fig2b.toml")),
    ("fig2c", include_str!("../../../experiments/fig2c.toml")),
    ("fig2d", include_str!("../../../experiments/fig2d.toml")),
    ("fig3", include_str!("../../../experiments/fig3.toml")),
    ("nash_gap", include_str!("../../../experiments/nash_gap.toml")),
];

pub fn bundled(name: &str) -> CliResult<ExperimentSpec> {
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| CliError::Config(format!("no bundled experiment named {name:?}")))?;
    ExperimentSpec::from_toml(text)
}

/// Parameter diagnostics of one series at the largest horizon.
#[derive(Debug, Clone)]
pub struct SeriesDiagnostics {
    pub series: String,
    pub horizon: usize,
    pub report: AssumptionReport,
}

/// Parses and checks a spec; structural problems are errors, parameter
/// conditions are reported per series.
pub fn validate_spec(path: &Path) -> CliResult<(ExperimentSpec, Vec<SeriesDiagnostics>)> {
    let spec = ExperimentSpec::load(path)?;
    let diags = diagnose(&spec)?;
    Ok((spec, diags))
}

pub fn diagnose(spec: &ExperimentSpec) -> CliResult<Vec<SeriesDiagnostics>> {
    spec.validate()?;
    let setting = spec.setting()?;
    let horizon = *spec.horizons().last().expect("validated non-empty");
    spec.scenarios()
        .into_iter()
        .map(|sc| {
            let report = match setting {
                Setting::Stationary => {
                    let (market, agent) = sc.stationary(horizon)?;
                    check_assumptions(&AssumptionContext::Stationary {
                        market: &market,
                        agent: &agent,
                        horizon,
                        scaling: sc.scaling(),
                    })
                }
                Setting::Population => {
                    let (setup, agents) = sc.population(horizon)?;
                    check_assumptions(&AssumptionContext::Population {
                        setup: &setup,
                        agents: &agents,
                        scaling: sc.scaling(),
                    })
                }
            };
            Ok(SeriesDiagnostics { series: sc.label.clone(), horizon, report })
        })
        .collect()
}

/// Fits a log-log slope per `(param_hash, stat_name)` group of a results
/// file. Groups with fewer than three positive means are skipped.
pub fn fit_results(records: &[ResultRecord]) -> Vec<(String, String, SlopeFit)> {
    let mut order: Vec<(String, String)> = Vec::new();
    let mut groups: BTreeMap<(String, String), Vec<(f64, f64)>> = BTreeMap::new();
    for r in records {
        let key = (r.param_hash.clone(), r.stat_name.clone());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push((r.horizon as f64, r.mean));
    }
    order
        .into_iter()
        .filter_map(|key| {
            let fit = fit_loglog_slope(&groups[&key]).ok()?;
            Some((key.0, key.1, fit))
        })
        .collect()
}
