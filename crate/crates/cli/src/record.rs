//! Line-delimited report records and the human summary table.

use otlab_core::report::{Check, Metric, Report};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub value: f64,
    pub relation: String,
    pub tolerance: f64,
    pub status: Status,
    pub asserted: bool,
    pub provenance: otlab_core::report::Provenance,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se: Option<f64>,
}

impl From<&Check> for CheckRecord {
    fn from(c: &Check) -> Self {
        let relation = match c.relation {
            otlab_core::report::Relation::Le => "<=",
            otlab_core::report::Relation::Ge => ">=",
        };
        Self {
            name: c.name.clone(),
            value: c.value,
            relation: relation.into(),
            tolerance: c.bound,
            status: if c.passed { Status::Pass } else { Status::Fail },
            asserted: c.asserted,
            provenance: c.provenance,
            se: c.se,
        }
    }
}

/// One (suite, instance) outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRecord {
    pub suite: String,
    pub instance: String,
    pub seed: u64,
    /// sha256 of suite, instance and the resolved config.
    pub digest: String,
    pub status: Status,
    pub checks: Vec<CheckRecord>,
    pub metrics: Vec<Metric>,
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_time_ms: f64,
    pub config: ExperimentConfig,
}

impl ReportRecord {
    pub fn from_outcome(
        suite: &str,
        instance: &str,
        seed: u64,
        config: &ExperimentConfig,
        outcome: Result<Report, String>,
        wall_time_ms: f64,
    ) -> Self {
        let digest = digest(suite, instance, config);
        match outcome {
            Ok(report) => {
                let checks: Vec<CheckRecord> = report.checks.iter().map(CheckRecord::from).collect();
                let failed = report.checks.iter().any(|c| c.failed());
                Self {
                    suite: suite.into(),
                    instance: instance.into(),
                    seed,
                    digest,
                    status: if failed { Status::Fail } else { Status::Pass },
                    checks,
                    metrics: report.metrics,
                    notes: report.notes,
                    error: None,
                    wall_time_ms,
                    config: config.clone(),
                }
            }
            Err(e) => Self {
                suite: suite.into(),
                instance: instance.into(),
                seed,
                digest,
                status: Status::Fail,
                checks: Vec::new(),
                metrics: Vec::new(),
                notes: Vec::new(),
                error: Some(e),
                wall_time_ms,
                config: config.clone(),
            },
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }

    /// The record without timing, for reproducibility comparisons.
    pub fn values(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("records serialize");
        if let Some(o) = v.as_object_mut() {
            o.remove("wall_time_ms");
        }
        v
    }

    pub fn check(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|m| m.name == name).map(|m| m.value)
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| c.status == Status::Fail)
    }
}

fn digest(suite: &str, instance: &str, config: &ExperimentConfig) -> String {
    let mut h = Sha256::new();
    h.update(suite.as_bytes());
    h.update([0]);
    h.update(instance.as_bytes());
    h.update([0]);
    h.update(serde_json::to_vec(config).expect("config serializes"));
    hex::encode(h.finalize())
}

/// Fixed-width table: one row per record, failing checks listed under it.
pub fn summary_table(records: &[ReportRecord]) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<10} {:<22} {:<6} {:>7} {:>7} {:>10}\n", "suite", "instance", "status", "checks", "failed", "time_ms"));
    for r in records {
        let failed = r.failed_checks().count();
        out.push_str(&format!(
            "{:<10} {:<22} {:<6} {:>7} {:>7} {:>10.1}\n",
            r.suite,
            r.instance,
            r.status.as_str(),
            r.checks.len(),
            failed,
            r.wall_time_ms
        ));
        if let Some(e) = &r.error {
            out.push_str(&format!("    error: {e}\n"));
        }
        for c in r.failed_checks() {
            let tag = if c.asserted { "" } else { " (report-only)" };
            out.push_str(&format!("    {} = {:.6e} {} {:.3e}{tag}\n", c.name, c.value, c.relation, c.tolerance));
        }
    }
    let asserted_fail = records.iter().filter(|r| r.error.is_some() || r.failed_checks().any(|c| c.asserted)).count();
    out.push_str(&format!("{} records, {} with asserted failures\n", records.len(), asserted_fail));
    out
}
