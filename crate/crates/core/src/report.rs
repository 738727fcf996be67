//! Check records shared by every verification operation.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ClosedForm,
    Algebraic,
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
}

/// One measured quantity compared against a bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub passed: bool,
    /// Report-only checks never fail a run.
    pub asserted: bool,
    pub provenance: Provenance,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se: Option<f64>,
}

impl Check {
    pub fn le(name: impl Into<String>, value: f64, bound: f64, provenance: Provenance) -> Self {
        Self {
            name: name.into(),
            value,
            relation: Relation::Le,
            bound,
            passed: value <= bound,
            asserted: true,
            provenance,
            se: None,
        }
    }

    pub fn ge(name: impl Into<String>, value: f64, bound: f64, provenance: Provenance) -> Self {
        Self {
            name: name.into(),
            value,
            relation: Relation::Ge,
            bound,
            passed: value >= bound,
            asserted: true,
            provenance,
            se: None,
        }
    }

    pub fn with_se(mut self, se: f64) -> Self {
        self.se = Some(se);
        self
    }

    pub fn report_only(mut self) -> Self {
        self.asserted = false;
        self
    }

    pub fn asserted_if(mut self, asserted: bool) -> Self {
        self.asserted = asserted;
        self
    }

    pub fn failed(&self) -> bool {
        self.asserted && !self.passed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se: Option<f64>,
}

/// Outcome of a verification operation: asserted checks, reported values and notes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub name: String,
    pub checks: Vec<Check>,
    pub metrics: Vec<Metric>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), checks: Vec::new(), metrics: Vec::new(), notes: Vec::new() }
    }

    pub fn check(&mut self, c: Check) -> &mut Self {
        self.checks.push(c);
        self
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64) -> &mut Self {
        self.metrics.push(Metric { name: name.into(), value, se: None });
        self
    }

    pub fn metric_se(&mut self, name: impl Into<String>, value: f64, se: f64) -> &mut Self {
        self.metrics.push(Metric { name: name.into(), value, se: Some(se) });
        self
    }

    pub fn note(&mut self, note: impl Into<String>) -> &mut Self {
        self.notes.push(note.into());
        self
    }

    /// Appends another report's content under a name prefix.
    pub fn absorb(&mut self, prefix: &str, other: Report) -> &mut Self {
        let name = |n: String| if prefix.is_empty() { n } else { format!("{prefix}.{n}") };
        for mut c in other.checks {
            c.name = name(c.name);
            self.checks.push(c);
        }
        for mut m in other.metrics {
            m.name = name(m.name);
            self.metrics.push(m);
        }
        if prefix.is_empty() {
            self.notes.extend(other.notes);
        } else {
            self.notes.extend(other.notes.into_iter().map(|n| format!("{prefix}: {n}")));
        }
        self
    }

    /// True when no asserted check failed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| !c.failed())
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn metric_value(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|m| m.name == name).map(|m| m.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_only_checks_do_not_fail() {
        let mut r = Report::new("x");
        r.check(Check::le("a", 2.0, 1.0, Provenance::Algebraic).report_only());
        assert!(r.passed());
        r.check(Check::le("b", f64::NAN, 1.0, Provenance::Algebraic));
        assert!(!r.passed());
    }
}
