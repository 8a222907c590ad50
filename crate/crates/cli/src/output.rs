//! CSV and JSON writers.
//!
//! `results.csv` has one row per (grid point, statistic) with columns
//! `grid_id,T,param_hash,stat_name,mean,ci_lo,ci_hi,n_reps`. `grid.csv` maps
//! grid ids to series labels, `slopes.csv` holds log-log fits per series
//! and statistic, and `episode.csv` holds sampled paths of episode runs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::runner::SweepResult;
use crate::spec::ExperimentSpec;

pub const RESULTS_HEADER: [&str; 8] = ["grid_id", "T", "param_hash", "stat_name", "mean", "ci_lo", "ci_hi", "n_reps"];
pub const GRID_HEADER: [&str; 6] = ["grid_id", "series", "T", "param_hash", "initial_karma", "initial_step"];
pub const SLOPES_HEADER: [&str; 5] = ["series", "stat_name", "slope", "stderr", "n_points"];
pub const EPISODE_HEADER: [&str; 5] = ["series", "t", "karma", "multiplier", "cumulative_saved"];

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    name: &'a str,
    kind: &'a str,
    seed: u64,
    replications: usize,
    horizons: Vec<usize>,
    code_version: &'a str,
    files: Vec<&'a str>,
    spec: &'a ExperimentSpec,
}

fn float(x: f64) -> String {
    format!("{x}")
}

fn writer(dir: &Path, name: &str) -> CliResult<csv::Writer<fs::File>> {
    let path = dir.join(name);
    csv::Writer::from_path(&path).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

/// Writes every output file into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, spec: &ExperimentSpec, result: &SweepResult) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    let mut files = vec!["results.csv", "grid.csv", "slopes.csv"];

    let mut w = writer(dir, "results.csv")?;
    w.write_record(RESULTS_HEADER)?;
    for r in &result.stats {
        w.write_record([
            r.grid_id.to_string(),
            r.horizon.to_string(),
            r.param_hash.clone(),
            r.stat_name.clone(),
            float(r.ci.mean),
            float(r.ci.ci_lo),
            float(r.ci.ci_hi),
            r.ci.n.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = writer(dir, "grid.csv")?;
    w.write_record(GRID_HEADER)?;
    for g in &result.grid {
        w.write_record([
            g.grid_id.to_string(),
            g.series.clone(),
            g.horizon.to_string(),
            g.param_hash.clone(),
            float(g.initial_karma),
            float(g.initial_step),
        ])?;
    }
    w.flush()?;

    let mut w = writer(dir, "slopes.csv")?;
    w.write_record(SLOPES_HEADER)?;
    for s in &result.slopes {
        w.write_record([
            s.series.clone(),
            s.stat_name.clone(),
            float(s.fit.slope),
            float(s.fit.stderr),
            s.fit.n_points.to_string(),
        ])?;
    }
    w.flush()?;

    if !result.episodes.is_empty() {
        files.push("episode.csv");
        let mut w = writer(dir, "episode.csv")?;
        w.write_record(EPISODE_HEADER)?;
        for e in &result.episodes {
            let p = &e.point;
            w.write_record([
                e.series.clone(),
                p.t.to_string(),
                float(p.karma),
                float(p.multiplier),
                float(p.cumulative_saved),
            ])?;
        }
        w.flush()?;
    }

    files.push("manifest.json");
    let manifest = Manifest {
        name: &spec.name,
        kind: spec.kind.name(),
        seed: spec.seed,
        replications: spec.replications,
        horizons: spec.horizons(),
        code_version: env!("CARGO_PKG_VERSION"),
        files: files.clone(),
        spec,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut f = fs::File::create(dir.join("manifest.json"))?;
    f.write_all(json.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(files.into_iter().map(|f| dir.join(f)).collect())
}

/// Row of `results.csv` as read back by `fit-slope`.
#[derive(Debug, Clone, PartialEq, serde::Deserialize)]
pub struct ResultRecord {
    pub grid_id: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub param_hash: String,
    pub stat_name: String,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_reps: usize,
}

pub fn read_results(path: &Path) -> CliResult<Vec<ResultRecord>> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != RESULTS_HEADER {
        return Err(CliError::Config(format!("{} does not have the results.csv header", path.display())));
    }
    r.deserialize().map(|row| row.map_err(|e| CliError::Config(format!("bad row in {}: {e}", path.display())))).collect()
}
