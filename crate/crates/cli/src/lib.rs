//! Experiment runner: resolves a configuration into (suite, instance) jobs,
//! runs them on a worker pool and writes line-delimited records.

pub mod config;
pub mod error;
pub mod instances;
pub mod record;
pub mod suites;

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use config::ExperimentConfig;
use error::CliError;
use instances::Instance;
use otlab_core::rng::derive_seed;
use record::ReportRecord;
use suites::{run_suite, Suite};

/// Concrete (suite, instance) pairs in run order.
pub fn jobs(cfg: &ExperimentConfig) -> Result<Vec<(Suite, Instance)>, CliError> {
    let suite = cfg.suite()?;
    let instances = cfg.resolved_instances()?;
    let mut out = Vec::new();
    match suite {
        Suite::All => {
            // each suite runs its own defaults, restricted to the requested list
            for &s in Suite::concrete() {
                for i in s.default_instances() {
                    if instances.contains(&i) {
                        out.push((s, i));
                    }
                }
            }
        }
        s => out.extend(instances.into_iter().map(|i| (s, i))),
    }
    Ok(out)
}

/// Runs one job; suite errors become FAIL records.
pub fn run_job(suite: Suite, instance: Instance, cfg: &ExperimentConfig) -> ReportRecord {
    let seed = derive_seed(cfg.seed, &format!("{}/{}", suite.name(), instance.name()));
    let start = Instant::now();
    let outcome = run_suite(suite, instance, cfg, seed).map_err(|e| e.to_string());
    let ms = start.elapsed().as_secs_f64() * 1e3;
    ReportRecord::from_outcome(suite.name(), instance.name(), seed, cfg, outcome, ms)
}

/// Runs every job of the configuration. `workers` sizes the thread pool;
/// results do not depend on it.
pub fn run(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<Vec<ReportRecord>, CliError> {
    cfg.validate()?;
    let cfg = cfg.materialized()?;
    let jobs = jobs(&cfg)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder.build().map_err(|e| CliError::Workers(e.to_string()))?;
    Ok(pool.install(|| jobs.par_iter().map(|&(s, i)| run_job(s, i, &cfg)).collect()))
}

/// True when some record has an asserted failure or an error.
pub fn any_failure(records: &[ReportRecord]) -> bool {
    records.iter().any(|r| r.status == record::Status::Fail)
}

/// Writes `records.jsonl` and `summary.txt` into `dir`.
pub fn write_outputs(dir: &Path, records: &[ReportRecord]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io { path: dir.to_path_buf(), message: e.to_string() };
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut lines = String::new();
    for r in records {
        lines.push_str(&r.to_json_line());
        lines.push('\n');
    }
    std::fs::write(dir.join("records.jsonl"), lines).map_err(io)?;
    std::fs::write(dir.join("summary.txt"), record::summary_table(records)).map_err(io)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteListing {
    pub suite: &'static str,
    pub anchor: &'static str,
    pub verifies: &'static str,
    pub instances: Vec<&'static str>,
}

pub fn list_suites() -> Vec<SuiteListing> {
    Suite::concrete()
        .iter()
        .map(|&s| SuiteListing {
            suite: s.name(),
            anchor: s.anchor(),
            verifies: s.verifies(),
            instances: s.default_instances().iter().map(|i| i.name()).collect(),
        })
        .collect()
}

pub fn list_text() -> String {
    let mut out = String::new();
    for l in list_suites() {
        out.push_str(&format!("{} — {}\n    {}\n    instances: {}\n", l.suite, l.anchor, l.verifies, l.instances.join(", ")));
    }
    out
}
