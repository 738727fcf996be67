//! Experiment configuration. Every field has a default and the resolved
//! configuration, defaults included, is echoed into each report record.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::instances::Instance;
use crate::suites::Suite;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub suite: String,
    /// Empty means the suite's built-in instance list.
    pub instances: Vec<String>,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub sampling: Sampling,
    pub grid: Grid,
    pub polar: PolarParams,
    pub ito: ItoParams,
    pub dimlift: DimliftParams,
    pub tolerances: Tolerances,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            suite: "all".into(),
            instances: Vec::new(),
            seed: 20_240_601,
            output: None,
            sampling: Sampling::default(),
            grid: Grid::default(),
            polar: PolarParams::default(),
            ito: ItoParams::default(),
            dimlift: DimliftParams::default(),
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sampling {
    /// Monte-Carlo sample count for expectations.
    pub mc_samples: usize,
    /// Probe points for pointwise identities.
    pub probes: usize,
    pub cycles: usize,
    pub cycle_length: usize,
    /// Cloud size for the discrete assignment oracle.
    pub oracle_points: usize,
    pub field_pairs: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Self { mc_samples: 100_000, probes: 1000, cycles: 10_000, cycle_length: 4, oracle_points: 500, field_pairs: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub points: usize,
    pub radius: f64,
    pub target_cells: usize,
}

impl Default for Grid {
    fn default() -> Self {
        let g = otlab_core::transport::GridSpec::default();
        Self { points: g.points, radius: g.radius, target_cells: g.target_cells }
    }
}

impl Grid {
    pub fn spec(&self) -> otlab_core::transport::GridSpec {
        otlab_core::transport::GridSpec { points: self.points, radius: self.radius, target_cells: self.target_cells }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolarParams {
    pub random_operators: usize,
    pub max_dim: usize,
    pub girsanov_operators: usize,
    pub rotation_trials: usize,
    pub frequencies: usize,
    pub oracle_points: usize,
}

impl Default for PolarParams {
    fn default() -> Self {
        Self { random_operators: 100, max_dim: 8, girsanov_operators: 20, rotation_trials: 100, frequencies: 20, oracle_points: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ItoParams {
    pub steps: usize,
    pub paths: usize,
    pub brownian_paths: usize,
    pub convergence_steps: Vec<usize>,
    pub continuations: usize,
    pub ess_floor: f64,
    pub drift_points: usize,
    pub rotation_trials: usize,
    /// Mean relative Λ error allowed at `reference_steps`.
    pub lambda_mean_tol: f64,
    pub reference_steps: usize,
    /// Largest error ratio accepted per doubling of the step count.
    pub doubling_ratio: f64,
}

impl Default for ItoParams {
    fn default() -> Self {
        Self {
            steps: 32,
            paths: 10_000,
            brownian_paths: 100_000,
            convergence_steps: vec![32, 64, 128],
            continuations: 500,
            ess_floor: 50.0,
            drift_points: 20,
            rotation_trials: 10,
            lambda_mean_tol: 0.03,
            reference_steps: 64,
            doubling_ratio: 0.75,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimliftParams {
    pub exp_t: f64,
}

impl Default for DimliftParams {
    fn default() -> Self {
        Self { exp_t: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub ma_closed_form: f64,
    pub ma_tabulated: f64,
    pub algebraic: f64,
    pub lipschitz: f64,
    pub convexity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { ma_closed_form: 1e-6, ma_tabulated: 1e-4, algebraic: 1e-10, lipschitz: 1e-9, convexity: 1e-9 }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::Config { field: "<syntax>".into(), message: e.to_string() })?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            CliError::Config { field, message: e.into_inner().message().to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), message: e.to_string() })?;
        Self::from_toml(&text)
    }

    pub fn suite(&self) -> Result<Suite, CliError> {
        Suite::parse(&self.suite).ok_or_else(|| CliError::Config {
            field: "suite".into(),
            message: format!("unknown suite `{}`; expected one of {}", self.suite, Suite::names().join(", ")),
        })
    }

    /// Instances to run, with the suite defaults filled in.
    pub fn resolved_instances(&self) -> Result<Vec<Instance>, CliError> {
        let suite = self.suite()?;
        if self.instances.is_empty() {
            return Ok(suite.default_instances());
        }
        self.instances
            .iter()
            .map(|name| {
                let inst = Instance::parse(name).ok_or_else(|| CliError::Config {
                    field: "instances".into(),
                    message: format!("unknown instance `{name}`; expected one of {}", Instance::names().join(", ")),
                })?;
                if suite.supports(inst) {
                    Ok(inst)
                } else {
                    Err(CliError::Config {
                        field: "instances".into(),
                        message: format!("instance `{name}` is not part of suite `{}`", suite.name()),
                    })
                }
            })
            .collect()
    }

    /// Materializes the instance list so the echoed config has no implicit parts.
    pub fn materialized(&self) -> Result<Self, CliError> {
        let mut out = self.clone();
        out.instances = self.resolved_instances()?.iter().map(|i| i.name().to_string()).collect();
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.suite()?;
        self.resolved_instances()?;
        let positive = [
            ("sampling.mc_samples", self.sampling.mc_samples),
            ("sampling.probes", self.sampling.probes),
            ("sampling.cycles", self.sampling.cycles),
            ("sampling.oracle_points", self.sampling.oracle_points),
            ("sampling.field_pairs", self.sampling.field_pairs),
            ("grid.points", self.grid.points),
            ("grid.target_cells", self.grid.target_cells),
            ("polar.max_dim", self.polar.max_dim),
            ("ito.steps", self.ito.steps),
            ("ito.paths", self.ito.paths),
            ("ito.brownian_paths", self.ito.brownian_paths),
            ("ito.continuations", self.ito.continuations),
            ("ito.reference_steps", self.ito.reference_steps),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(CliError::Config { field: field.into(), message: "must be positive".into() });
            }
        }
        if self.sampling.cycle_length < 2 {
            return Err(CliError::Config { field: "sampling.cycle_length".into(), message: "must be at least 2".into() });
        }
        if self.sampling.oracle_points > otlab_core::assignment::MAX_ASSIGNMENT {
            return Err(CliError::Config {
                field: "sampling.oracle_points".into(),
                message: format!("exact assignment is limited to {} points", otlab_core::assignment::MAX_ASSIGNMENT),
            });
        }
        if self.polar.oracle_points > otlab_core::assignment::MAX_ASSIGNMENT {
            return Err(CliError::Config {
                field: "polar.oracle_points".into(),
                message: format!("exact assignment is limited to {} points", otlab_core::assignment::MAX_ASSIGNMENT),
            });
        }
        if !(self.grid.radius > 0.0 && self.grid.radius.is_finite()) {
            return Err(CliError::Config { field: "grid.radius".into(), message: "must be positive and finite".into() });
        }
        if !(self.dimlift.exp_t > 0.0) {
            return Err(CliError::Config { field: "dimlift.exp_t".into(), message: "must be positive".into() });
        }
        if self.ito.convergence_steps.iter().any(|&m| m == 0) {
            return Err(CliError::Config { field: "ito.convergence_steps".into(), message: "step counts must be positive".into() });
        }
        let tols = [
            ("tolerances.ma_closed_form", self.tolerances.ma_closed_form),
            ("tolerances.ma_tabulated", self.tolerances.ma_tabulated),
            ("tolerances.algebraic", self.tolerances.algebraic),
            ("tolerances.lipschitz", self.tolerances.lipschitz),
            ("tolerances.convexity", self.tolerances.convexity),
            ("ito.lambda_mean_tol", self.ito.lambda_mean_tol),
            ("ito.doubling_ratio", self.ito.doubling_ratio),
        ];
        for (field, v) in tols {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(CliError::Config { field: field.into(), message: "must be a finite non-negative number".into() });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn errors_name_the_field() {
        let e = ExperimentConfig::from_toml("[sampling]\nprobes = \"many\"").unwrap_err();
        assert!(matches!(&e, CliError::Config { field, .. } if field == "sampling.probes"), "{e}");
        let e = ExperimentConfig::from_toml("[grid]\nwidth = 3").unwrap_err();
        assert!(matches!(&e, CliError::Config { field, .. } if field.starts_with("grid")), "{e}");
        let e = ExperimentConfig::from_toml("suite = \"nope\"").unwrap_err();
        assert!(matches!(&e, CliError::Config { field, .. } if field == "suite"));
        let e = ExperimentConfig::from_toml("[ito]\nsteps = 0").unwrap_err();
        assert!(matches!(&e, CliError::Config { field, .. } if field == "ito.steps"));
    }

    #[test]
    fn instance_must_belong_to_suite() {
        let e = ExperimentConfig::from_toml("suite = \"ito-sim\"\ninstances = [\"coupled-2d\"]").unwrap_err();
        assert!(matches!(&e, CliError::Config { field, .. } if field == "instances"));
    }

    #[test]
    fn materialized_lists_instances() {
        let c = ExperimentConfig::from_toml("suite = \"ito-sim\"").unwrap().materialized().unwrap();
        assert_eq!(c.instances, vec!["linear-a1", "quadratic-w1"]);
    }
}
