use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use karma_cli::{
    bundled, fit_results, read_results, run_experiment_with, validate_spec, worker_count, write_outputs, CliError,
    CliResult, ExperimentSpec, BUNDLED,
};
use karma_core::metrics::CheckStatus;

/// Simulator and experiment harness for repeated karma auctions.
#[derive(Debug, Parser)]
#[command(name = "karma", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment spec (a path, or the name of a bundled spec).
    Run {
        spec: String,
        /// Output directory; defaults to the spec's `output` or `results/<name>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; overrides the environment variable.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Check a spec and report parameter diagnostics.
    Validate { spec: String },
    /// List the bundled experiment specs.
    ListExperiments,
    /// Fit log-log slopes to the statistics of a results.csv file.
    FitSlope { results: PathBuf },
}

/// Whether the argument names a file rather than a bundled spec.
fn is_path(spec: &str) -> bool {
    let path = Path::new(spec);
    path.exists() || path.extension().is_some() || spec.contains(std::path::MAIN_SEPARATOR)
}

fn load(spec: &str) -> CliResult<ExperimentSpec> {
    let path = Path::new(spec);
    if is_path(spec) {
        ExperimentSpec::load(path)
    } else {
        bundled(spec)
    }
}

fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Run { spec, out, workers } => {
            let spec = load(&spec)?;
            let dir = out.or_else(|| spec.output.clone()).unwrap_or_else(|| PathBuf::from("results").join(&spec.name));
            let workers = workers.unwrap_or_else(worker_count);
            eprintln!("running {} ({}) with {workers} worker(s)", spec.name, spec.kind.name());
            let result = run_experiment_with(&spec, workers)?;
            for path in write_outputs(&dir, &spec, &result)? {
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::Validate { spec } => {
            let path = Path::new(&spec);
            let (spec, diags) = if is_path(&spec) {
                validate_spec(path)?
            } else {
                let s = bundled(&spec)?;
                let d = karma_cli::diagnose(&s)?;
                (s, d)
            };
            println!("{}: valid {} spec", spec.name, spec.kind.name());
            for d in diags {
                println!("series {} at T={}", d.series, d.horizon);
                for c in d.report.checks {
                    let status = match c.status {
                        CheckStatus::Pass => "pass",
                        CheckStatus::Fail => "FAIL",
                        CheckStatus::NotCheckable => "n/a",
                    };
                    println!("  {status:<4} {:<40} {}", c.id, c.detail);
                }
            }
            Ok(())
        }
        Command::ListExperiments => {
            for (name, _) in BUNDLED {
                let spec = bundled(name)?;
                println!("{name:<10} {:<26} {}", spec.kind.name(), spec.description);
            }
            Ok(())
        }
        Command::FitSlope { results } => {
            let records = read_results(&results)?;
            let labels = series_labels(&results);
            println!("series,stat_name,slope,stderr,n_points");
            for (hash, stat, fit) in fit_results(&records) {
                let series = labels.iter().find(|(h, _)| *h == hash).map_or(hash.as_str(), |(_, l)| l.as_str());
                println!("{series},{stat},{},{},{}", fit.slope, fit.stderr, fit.n_points);
            }
            Ok(())
        }
    }
}

/// Series labels from a `grid.csv` next to the results file, if present.
fn series_labels(results: &Path) -> Vec<(String, String)> {
    let grid = results.with_file_name("grid.csv");
    let Ok(mut r) = csv::Reader::from_path(grid) else { return Vec::new() };
    r.records()
        .filter_map(Result::ok)
        .filter_map(|rec| Some((rec.get(3)?.to_string(), rec.get(1)?.to_string())))
        .collect()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(CliError::exit_code(&e) as u8)
        }
    }
}
