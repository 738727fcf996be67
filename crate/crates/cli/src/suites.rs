//! Suite definitions: which instances each suite runs and what it checks.

use nalgebra::{DMatrix, DVector};
use otlab_core::det2::{det2, det2_direct, log_det2, HsPerturbation};
use otlab_core::dimlift::{
    condition_density, conditioning_report, convergence_study, exp_integrability_check, hessian_bound_study, talagrand_defect,
};
use otlab_core::gaussian::{GaussianSpace, McEstimate, SampleBatch};
use otlab_core::ito::{
    jacobian_report, lambda_convergence, nested_drift_check, free_energy_identity, rotation_check, DriftMethod, ItoModel, PathBatch,
    TimeGrid,
};
use otlab_core::linalg::{gaussian_matrix, identity, random_symmetric_above};
use otlab_core::monge_ampere::{
    cyclic_monotonicity_check, discrete_ot_oracle, divergence_composition_gap, interpolation_bound, lipschitz_check, ma_residual,
    perturbed_subsolution, pushforward_check, random_field_pair, solve, subsolution_check, wasserstein_identity, PolyField,
    TestFunction,
};
use otlab_core::polar::{
    characteristic_function_check, factorize_general_map, gaussian_target_map, gaussian_target_report, girsanov_density_check,
    helmholtz_explore, minimal_rotation_check, polar_factorize, potentials, recover_m, right_inverse_check, GaussianTarget,
};
use otlab_core::report::{Check, Provenance, Report};
use otlab_core::rng::{derive_seed, stream};
use otlab_core::{OtError, Result};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::instances::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Detcf,
    Polar,
    Gaussmap,
    MaVerify,
    Dimlift,
    ItoSim,
    All,
}

const CONCRETE: [Suite; 6] = [Suite::Detcf, Suite::Polar, Suite::Gaussmap, Suite::MaVerify, Suite::Dimlift, Suite::ItoSim];

impl Suite {
    pub fn all() -> [Suite; 7] {
        [Suite::Detcf, Suite::Polar, Suite::Gaussmap, Suite::MaVerify, Suite::Dimlift, Suite::ItoSim, Suite::All]
    }

    pub fn concrete() -> &'static [Suite] {
        &CONCRETE
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::Detcf => "detcf",
            Suite::Polar => "polar",
            Suite::Gaussmap => "gaussmap",
            Suite::MaVerify => "ma-verify",
            Suite::Dimlift => "dimlift",
            Suite::ItoSim => "ito-sim",
            Suite::All => "all",
        }
    }

    pub fn names() -> Vec<&'static str> {
        Self::all().iter().map(|s| s.name()).collect()
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::all().into_iter().find(|s| s.name() == name)
    }

    /// Where in the theory the suite's checks come from.
    pub fn anchor(self) -> &'static str {
        match self {
            Suite::Detcf => "§4.1 det₂",
            Suite::Polar => "Thm 4.1 / §4.1",
            Suite::Gaussmap => "§4.1 / Eq. 4.7",
            Suite::MaVerify => "Eq. 5.12",
            Suite::Dimlift => "Remark 3.4 / Thm 5.1",
            Suite::ItoSim => "Thm 6.1 / Eq. 6.15",
            Suite::All => "every suite",
        }
    }

    pub fn verifies(self) -> &'static str {
        match self {
            Suite::Detcf => "det2(I+K) = det(I+K)e^{-tr K}; convexity and sign of log det2; block invariance",
            Suite::Polar => "polar factorization I+K = (I+K̄)(I+A), Girsanov density, potentials, minimal rotation, right inverse",
            Suite::Gaussmap => "Gaussian target map N = Q^{1/2} - I, characteristic function, M = N² + 2N",
            Suite::MaVerify => {
                "strong Monge-Ampère equation with det2, sub-solution, Wasserstein identity, interpolation bound, Lipschitz gate, divergence composition"
            }
            Suite::Dimlift => "conditioned densities, convergence of potentials, Hessian bound, Talagrand defect, exponential integrability",
            Suite::ItoSim => "Itô Jacobian, Brownian part of the transport process, rotations, free-energy identity",
            Suite::All => "all of the above",
        }
    }

    pub fn default_instances(self) -> Vec<Instance> {
        use Instance::*;
        match self {
            Suite::Detcf => vec![Zero, CanonicalQuadratic, Gaussian4, PolarRot03, RandomOperators],
            Suite::Polar => vec![Zero, PolarRot03, RandomOperators],
            Suite::Gaussmap => vec![Zero, CanonicalQuadratic, Gaussian4],
            Suite::MaVerify => vec![CanonicalQuadratic, Quartic1d, Product2d, Coupled2d, N04Counterexample, FieldPairs],
            Suite::Dimlift => vec![CanonicalQuadratic, Coupled2d, Product2d],
            Suite::ItoSim => vec![LinearA1, QuadraticW1],
            Suite::All => {
                let mut v = Vec::new();
                for s in CONCRETE {
                    for i in s.default_instances() {
                        if !v.contains(&i) {
                            v.push(i);
                        }
                    }
                }
                v
            }
        }
    }

    pub fn supports(self, instance: Instance) -> bool {
        match self {
            Suite::Detcf => instance.operator().is_some() || instance == Instance::RandomOperators,
            Suite::Polar => matches!(instance, Instance::Zero | Instance::PolarRot03 | Instance::RandomOperators),
            Suite::Gaussmap => matches!(instance, Instance::Zero | Instance::CanonicalQuadratic | Instance::Gaussian4 | Instance::Coupled2d),
            Suite::MaVerify => instance.density().is_some() || instance == Instance::FieldPairs,
            Suite::Dimlift => instance.density().is_some(),
            Suite::ItoSim => instance.path_functional(1).is_some(),
            Suite::All => Instance::all().contains(&instance),
        }
    }
}

/// Runs one concrete suite on one instance.
pub fn run_suite(suite: Suite, instance: Instance, cfg: &ExperimentConfig, seed: u64) -> Result<Report> {
    match suite {
        Suite::Detcf => detcf(instance, cfg, seed),
        Suite::Polar => polar(instance, cfg, seed),
        Suite::Gaussmap => gaussmap(instance, cfg, seed),
        Suite::MaVerify => ma_verify(instance, cfg, seed),
        Suite::Dimlift => dimlift(instance, cfg, seed),
        Suite::ItoSim => ito_sim(instance, cfg, seed),
        Suite::All => Err(OtError::InvalidArgument("`all` is expanded before dispatch".into())),
    }
}

fn unsupported(suite: Suite, instance: Instance) -> OtError {
    OtError::InvalidArgument(format!("instance {} is not part of suite {}", instance.name(), suite.name()))
}

fn perturbation(k: DMatrix<f64>) -> Result<HsPerturbation> {
    if k == k.transpose() {
        HsPerturbation::symmetric(k)
    } else {
        HsPerturbation::general(k)
    }
}

fn detcf(instance: Instance, cfg: &ExperimentConfig, seed: u64) -> Result<Report> {
    let tol = cfg.tolerances.algebraic;
    let mut report = Report::new("detcf");
    if instance == Instance::RandomOperators {
        return random_det2_battery(cfg, seed);
    }
    let k = instance.operator().ok_or_else(|| unsupported(Suite::Detcf, instance))?;
    let p = perturbation(k.clone())?;
    let value = det2(&p);
    let direct = det2_direct(&p);
    report.metric("det2", value);
    report.metric("trace", p.trace());
    report.metric("hs_norm", p.hs_norm());
    report.check(Check::le("direct_formula_rel_gap", (value - direct).abs() / direct.abs().max(1e-300), tol, Provenance::Algebraic));
    if value > 0.0 {
        let ld = log_det2(&p)?;
        report.metric("log_det2", ld);
        report.check(Check::le("log_consistency", (ld - value.ln()).abs(), 1e-12, Provenance::Algebraic));
    }
    let padded = p.padded(p.dim() + 3)?;
    report.check(Check::le("block_invariance_gap", (det2(&padded) - value).abs(), 1e-14 * value.abs().max(1.0), Provenance::Algebraic));
    let general = HsPerturbation::general(k)?;
    report.check(Check::le("path_agreement_rel_gap", (det2(&general) - value).abs() / value.abs().max(1e-300), tol, Provenance::Algebraic));
    let expected = match instance {
        Instance::Zero => Some(1.0),
        Instance::CanonicalQuadratic => Some(0.5 * 0.5f64.exp()),
        Instance::Gaussian4 => Some(2.0 * (-1.0f64).exp()),
        Instance::PolarRot03 => Some(1.09),
        _ => None,
    };
    if let Some(e) = expected {
        report.metric("expected", e);
        report.check(Check::le("closed_form_rel_gap", (value - e).abs() / e, 1e-14, Provenance::ClosedForm));
    }
    Ok(report)
}

/// Convexity of `−log det₂` along segments, `log det₂ ≤ 0` and the
/// agreement of both computation paths on random symmetric perturbations.
fn random_det2_battery(cfg: &ExperimentConfig, seed: u64) -> Result<Report> {
    let mut report = Report::new("detcf-random");
    let mut worst_convexity = f64::NEG_INFINITY;
    let mut worst_sign = f64::NEG_INFINITY;
    let mut worst_paths = 0.0f64;
    let count = cfg.polar.random_operators;
    for k in 0..count {
        let mut rng = stream(seed, k as u64);
        let n = 1 + k % cfg.polar.max_dim;
        let a = random_symmetric_above(n, 0.6, 0.05, &mut rng);
        let b = random_symmetric_above(n, 0.6, 0.05, &mut rng);
        let t = (k as f64 + 0.5) / count as f64;
        let la = log_det2(&HsPerturbation::symmetric(a.clone())?)?;
        let lb = log_det2(&HsPerturbation::symmetric(b.clone())?)?;
        let lt = log_det2(&HsPerturbation::symmetric(&a * t + &b * (1.0 - t))?)?;
        worst_convexity = worst_convexity.max(-lt - (-t * la - (1.0 - t) * lb));
        worst_sign = worst_sign.max(la.max(lb));
        let g = det2(&HsPerturbation::general(a.clone())?);
        worst_paths = worst_paths.max((g - la.exp()).abs() / la.exp());
    }
    report.metric("operators", count as f64);
    report.check(Check::le("convexity_excess", worst_convexity, 1e-10, Provenance::Algebraic));
    report.check(Check::le("max_log_det2", worst_sign, 0.0, Provenance::Algebraic));
    report.check(Check::le("path_agreement_rel_gap", worst_paths, cfg.tolerances.algebraic, Provenance::Algebraic));
    Ok(report)
}

fn polar(instance: Instance, cfg: &ExperimentConfig, seed: u64) -> Result<Report> {
    match instance {
        Instance::RandomOperators => random_polar_battery(cfg, seed),
        Instance::Zero | Instance::PolarRot03 => {
            let k = instance.operator().expect("operator instance");
            let n = k.nrows();
            let p = HsPerturbation::general(k.clone())?;
            let f = polar_factorize(&p)?;
            let mut report = Report::new("polar");
            report.metric("orientation", f.orientation);
            report.check(Check::le("reconstruction_error", f.reconstruction_error(&k), cfg.tolerances.algebraic, Provenance::Algebraic));
            report.check(Check::le("isometry_error", f.isometry_error(), cfg.tolerances.algebraic, Provenance::Algebraic));
            if instance == Instance::PolarRot03 {
                let expected = identity(n) * (1.09f64.sqrt() - 1.0);
                report.check(Check::le("kbar_closed_form_gap", (&f.kbar - expected).amax(), 1e-14, Provenance::ClosedForm));
            }
            report.absorb("minimal_rotation", minimal_rotation_check(&p, cfg.polar.rotation_trials, seed)?);
            let batch = GaussianSpace::new(n)?.sample(cfg.sampling.mc_samples, derive_seed(seed, "girsanov"))?;
            report.absorb("girsanov", girsanov_density_check(&p, &batch)?);
            report.absorb("potentials", potentials(&f, seed)?.report);
            let probes = GaussianSpace::new(n)?.sample(cfg.sampling.probes, derive_seed(seed, "probes"))?;
            report.absorb("helmholtz", helmholtz_explore(&p, &probes)?.1);
            report.absorb("right_inverse", right_inverse_check(&HsPerturbation::symmetric(f.kbar.clone())?, &probes)?);
            let space = GaussianSpace::new(n)?;
            let pts = cfg.polar.oracle_points;
            let xs = space.sample(pts, derive_seed(seed, "oracle-x"))?;
            let rho = space.sample(pts, derive_seed(seed, "oracle-rho"))?;
            let fresh = space.sample(pts, derive_seed(seed, "oracle-fresh"))?;
            let ik = identity(n) + &k;
            let u: Vec<DVector<f64>> = (0..pts).map(|i| &ik * xs.vector(i)).collect();
            let rho_v: Vec<DVector<f64>> = (0..pts).map(|i| rho.vector(i)).collect();
            let fresh_v: Vec<DVector<f64>> = (0..pts).map(|i| fresh.vector(i)).collect();
            report.absorb("general_map", factorize_general_map(&u, &rho_v, &fresh_v, 20, seed)?.report);
            Ok(report)
        }
        _ => Err(unsupported(Suite::Polar, instance)),
    }
}

/// Random `K` with `n ≤ max_dim`: reconstruction, isometry and Procrustes
/// minimality for every operator, the Girsanov density for a subset.
fn random_polar_battery(cfg: &ExperimentConfig, seed: u64) -> Result<Report> {
    let mut report = Report::new("polar-random");
    let (mut worst_rec, mut worst_iso) = (0.0f64, 0.0f64);
    let mut minimality_failures = 0usize;
    let mut reflections = 0usize;
    let mut skipped = 0usize;
    let mut girsanov_failures = 0usize;
    let mut worst_pointwise = 0.0f64;
    let mut girsanov_done = 0usize;
    for k in 0..cfg.polar.random_operators {
        let mut rng = stream(seed, k as u64);
        let n = 1 + k % cfg.polar.max_dim;
        let m = gaussian_matrix(n, n, 0.5 / (n as f64).sqrt(), &mut rng);
        let p = HsPerturbation::general(m.clone())?;
        let f = match polar_factorize(&p) {
            Ok(f) => f,
            Err(OtError::SingularPerturbation(_)) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        worst_rec = worst_rec.max(f.reconstruction_error(&m));
        worst_iso = worst_iso.max(f.isometry_error());
        if f.orientation < 0.0 {
            reflections += 1;
        }
        let r = minimal_rotation_check(&p, cfg.polar.rotation_trials, derive_seed(seed, &format!("rot{k}")))?;
        if !r.passed() {
            minimality_failures += 1;
        }
        if girsanov_done < cfg.polar.girsanov_operators {
            let batch = GaussianSpace::new(n)?.sample(cfg.sampling.mc_samples, derive_seed(seed, &format!("gir{k}")))?;
            let g = girsanov_density_check(&p, &batch)?;
            if !g.passed() {
                girsanov_failures += 1;
            }
            if let Some(c) = g.get("pointwise_max_rel_error") {
                worst_pointwise = worst_pointwise.max(c.value);
            }
            girsanov_done += 1;
        }
    }
    report.metric("operators", cfg.polar.random_operators as f64);
    report.metric("singular_skipped", skipped as f64);
    report.metric("reflections", reflections as f64);
    report.metric("girsanov_operators", girsanov_done as f64);
    report.check(Check::le("max_reconstruction_error", worst_rec, cfg.tolerances.algebraic, Provenance::Algebraic));
    report.check(Check::le("max_isometry_error", worst_iso, cfg.tolerances.algebraic, Provenance::Algebraic));
    report.check(Check::le("minimality_failures", minimality_failures as f64, 0.0, Provenance::Algebraic));
    report.check(Check::le("girsanov_max_pointwise_rel_error", worst_pointwise, 1e-8, Provenance::Algebraic));
    report.check(Check::le("girsanov_failed_operators", girsanov_failures as f64, 0.0, Provenance::MonteCarlo));
    Ok(report)
}

fn gaussmap(instance: Instance, cfg: &ExperimentConfig, seed: u64) -> Result<Report> {
    let q = match instance {
        Instance::Zero => DMatrix::identity(1, 1),
        Instance::Gaussian4 => DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]),
        Instance::CanonicalQuadratic | Instance::Coupled2d => {
            let d = instance.density().expect("density instance")?;
            d.gaussian_target().ok_or_else(|| OtError::NonIntegrableDensity("no Gaussian target".into()))?.1
        }
        _ => return Err(unsupported(Suite::Gaussmap, instance)),
    };
    let target = GaussianTarget::new(q)?;
    let t = gaussian_target_map(&target)?;
    let n = target.dim();
    let mut report = Report::new("gaussmap");
    report.absorb("target", gaussian_target_report(&target, &t)?);
    let batch = GaussianSpace::new(n)?.sample(cfg.sampling.mc_samples, derive_seed(seed, "gaussmap"))?;
    report.absorb("characteristic", characteristic_function_check(&t, &target, &batch, cfg.polar.frequencies, seed)?);
    let rec = recover_m(&t, &batch)?;
    let m = target.m();
    let mut excess = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            excess = excess.max((rec.mean[(i, j)] - m[(i, j)]).abs() - 4.0 * rec.se[(i, j)]);
        }
    }
    for i in 0..n {
        report.metric_se(format!("recovered_m_{i}{i}"), rec.mean[(i, i)], rec.se[(i, i)]);
    }
    report.check(Check::le("recover_m_excess_over_4se", excess, 1e-12, Provenance::MonteCarlo));
    Ok(report)
}

fn ma_verify(instance: Instance, cfg: &ExperimentConfig, seed: u64) -> Result<Report> {
    if instance == Instance::FieldPairs {
        return field_pairs(cfg, seed);
    }
    let density = instance.density().ok_or_else(|| unsupported(Suite::MaVerify, instance))??;
    let n = density.dim();
    let t = solve(&density, cfg.grid.spec())?;
    let space = GaussianSpace::new(n)?;
    let probes = space.sample(cfg.sampling.probes, derive_seed(seed, "probes"))?;
    let batch = space.sample(cfg.sampling.mc_samples, derive_seed(seed, "mc"))?;
    let mut report = Report::new("ma-verify");
    report.metric("log_c", density.log_c());
    report.metric("min_hessian_eigenvalue_f", density.convexity_min());
    if !density.h_convex() {
        report.check(Check::ge("hypothesis_h_convex", density.convexity_min(), 0.0, Provenance::Algebraic).report_only());
        report.note("f is not H-convex: conclusions that depend on it are reported, not asserted");
    }
    report.absorb("invariants", t.validate(&probes, cfg.tolerances.convexity)?);
    let tol = if t.is_tabulated() { cfg.tolerances.ma_tabulated } else { cfg.tolerances.ma_closed_form };
    report.absorb("residual", ma_residual(&t, &density, &probes, Some(tol))?);
    report.absorb("pushforward", pushforward_check(&t, &density, &batch)?);
    report.absorb("subsolution", subsolution_check(&t, &density, &TestFunction::ALL, &batch)?);
    report.absorb("wasserstein", wasserstein_identity(&t, &density, &batch, None)?.1);
    report.absorb("interpolation", interpolation_bound(&t, &density, &[0.0, 0.25, 0.5, 0.75, 1.0])?);
    report.absorb("lipschitz", lipschitz_check(&t, &density, &probes, cfg.tolerances.lipschitz)?);
    report.absorb(
        "cyclic",
        cyclic_monotonicity_check(&t, cfg.sampling.cycles, cfg.sampling.cycle_length, derive_seed(seed, "cycles"), cfg.tolerances.algebraic),
    );
    if n == 1 {
        report.absorb("perturbed", perturbed_subsolution(&t, &density, 0.01, &probes)?);
    }
    report.absorb("discrete_oracle", oracle_consistency(&t, n, cfg.sampling.oracle_points, seed)?);
    Ok(report)
}

/// Discrete optimal cost between a source cloud and an independent target
/// cloud, against the continuous `d²` on the same number of points.
fn oracle_consistency(t: &otlab_core::transport::TransportSolution, n: usize, points: usize, seed: u64) -> Result<Report> {
    let space = GaussianSpace::new(n)?;
    let xs = space.sample(points, derive_seed(seed, "oracle-x"))?;
    let ys = space.sample(points, derive_seed(seed, "oracle-y"))?;
    let x: Vec<DVector<f64>> = (0..points).map(|i| xs.vector(i)).collect();
    let y: Vec<DVector<f64>> = (0..points).map(|i| t.map(ys.point(i))).collect();
    let ot = discrete_ot_oracle(&x, &y, None)?;
    let cont = McEstimate::from_values(&xs.par_map(|p| t.grad_phi(p).norm_squared()))?;
    let mut report = Report::new("discrete-oracle");
    report.metric("discrete_mean_cost", ot.mean_cost);
    report.metric_se("continuous_d2", cont.mean, cont.se);
    report.check(Check::ge("discrete_minus_continuous", ot.mean_cost - cont.mean, -4.0 * cont.se, Provenance::MonteCarlo).report_only());
    Ok(report)
}

fn field_pairs(cfg: &ExperimentConfig, seed: u64) -> Result<Report> {
    let dim = 3;
    let batch = GaussianSpace::new(dim)?.sample(100, derive_seed(seed, "points"))?;
    let mut worst = 0.0f64;
    for k in 0..cfg.sampling.field_pairs {
        let (xi, u) = random_field_pair(dim, seed, k as u64);
        worst = worst.max(divergence_composition_gap(&xi, &u, &batch)?);
    }
    let mut rng = stream(derive_seed(seed, "linear"), 0);
    let a = gaussian_matrix(dim, dim, 1.0, &mut rng);
    let b = gaussian_matrix(dim, dim, 0.5, &mut rng);
    let linear = divergence_composition_gap(&PolyField::linear(&a), &PolyField::linear(&b), &batch)?;
    let zero = divergence_composition_gap(&random_field_pair(dim, seed, 0).0, &PolyField::zero(dim), &batch)?;
    let mut report = Report::new("divergence-composition");
    report.metric("pairs", cfg.sampling.field_pairs as f64);
    report.check(Check::le("max_gap_polynomial", worst, cfg.tolerances.algebraic, Provenance::Algebraic));
    report.check(Check::le("max_gap_linear", linear, 1e-12, Provenance::Algebraic));
    report.check(Check::le("gap_zero_shift", zero, 1e-12, Provenance::Algebraic));
    Ok(report)
}

fn dimlift(instance: Instance, cfg: &ExperimentConfig, seed: u64) -> Result<Report> {
    let density = instance.density().ok_or_else(|| unsupported(Suite::Dimlift, instance))??;
    let d = density.dim();
    let dims: Vec<usize> = (1..=d).collect();
    let space = GaussianSpace::new(d)?;
    let probes = space.sample(cfg.sampling.probes, derive_seed(seed, "probes"))?;
    let batch = space.sample(cfg.sampling.mc_samples, derive_seed(seed, "mc"))?;
    let grid = cfg.grid.spec();
    let mut report = Report::new("dimlift");
    for &n in &dims {
        let cond = condition_density(&density, n, None)?;
        report.absorb(&format!("n{n}"), conditioning_report(&density, &cond, &probes, cfg.tolerances.convexity)?);
    }
    report.absorb("convergence", convergence_study(&density, &dims, &batch, grid)?.1);
    report.absorb("hessian", hessian_bound_study(&density, &dims, &batch, grid)?.1);
    report.absorb("talagrand", talagrand_defect(&density, &batch, grid)?.1);
    report.absorb("exp_integrability", exp_integrability_check(&density, &dims, cfg.dimlift.exp_t, &batch, grid)?.1);
    Ok(report)
}

fn ito_sim(instance: Instance, cfg: &ExperimentConfig, seed: u64) -> Result<Report> {
    let p = &cfg.ito;
    let f = instance.path_functional(p.steps).ok_or_else(|| unsupported(Suite::ItoSim, instance))?;
    let grid = TimeGrid::uniform(p.steps)?;
    let model = ItoModel::new(f.clone(), &grid, DriftMethod::ClosedForm)?;
    let linear = matches!(f, otlab_core::ito::PathFunctional::Linear { .. });
    let mut report = Report::new("ito-sim");
    report.metric("log_c", model.log_c());

    // the path map in closed form
    let sample = PathBatch::simulate(&grid, 200, derive_seed(seed, "map"))?;
    let mut map_gap = 0.0f64;
    for j in 0..sample.count() {
        let w = sample.path(j);
        let t = model.transport.path(sample.increments(j));
        let w1 = *w.last().expect("non-empty path");
        for k in 0..grid.m() {
            let time = grid.times()[k + 1];
            let expected = match instance {
                Instance::LinearA1 => w[k] - time,
                Instance::QuadraticW1 => w[k] + (0.5 - 1.0) * time * w1,
                _ => w[k],
            };
            map_gap = map_gap.max((t[k] - expected).abs());
        }
    }
    report.check(Check::le("path_map_closed_form_gap", map_gap, 1e-12, Provenance::ClosedForm));

    let brownian = PathBatch::simulate(&grid, p.brownian_paths, derive_seed(seed, "brownian"))?;
    report.absorb("jacobian", jacobian_report(&model, &brownian, linear.then_some(1e-12), None)?);
    let batch = PathBatch::simulate(&grid, p.paths, derive_seed(seed, "paths"))?;
    report.absorb("free_energy", free_energy_identity(&model, &batch)?);
    report.absorb("rotation", rotation_check(&model, &batch, p.rotation_trials)?);
    let nested = DriftMethod::NestedMc { continuations: p.continuations, ess_floor: p.ess_floor, seed: derive_seed(seed, "nested") };
    report.absorb("nested_drift", nested_drift_check(&f, &batch, p.drift_points, nested)?);
    if !linear {
        let mut steps = p.convergence_steps.clone();
        if !steps.contains(&p.reference_steps) {
            steps.push(p.reference_steps);
            steps.sort_unstable();
        }
        let (errs, conv) = lambda_convergence(
            |m| instance.path_functional(m).expect("path instance"),
            &steps,
            p.paths,
            derive_seed(seed, "convergence"),
            p.doubling_ratio,
        )?;
        report.absorb("convergence", conv);
        let at_ref = errs.iter().find(|(m, _)| *m == p.reference_steps).expect("reference step count included").1;
        report.check(
            Check::le(format!("lambda_mean_rel_error_m{}", p.reference_steps), at_ref.mean_rel, p.lambda_mean_tol, Provenance::MonteCarlo)
                .with_se(at_ref.mean_rel_se),
        );
    }
    Ok(report)
}

/// Probe batch helper for tests and the acceptance target.
pub fn probes(dim: usize, count: usize, seed: u64) -> Result<SampleBatch> {
    GaussianSpace::new(dim)?.sample(count, seed)
}
