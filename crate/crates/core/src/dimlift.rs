//! Dimension lifting: `L_n = E[L | x₁..x_n]` with the trailing coordinates
//! integrated against the standard Gaussian, and the behaviour of the
//! potentials `φ_n` as `n` grows.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{OtError, Result};
use crate::gaussian::{check_one_convex, CustomFunctional, Functional, GaussianSpace, McEstimate, SampleBatch};
use crate::linalg::{identity, sym_eigen, sym_inverse, sym_log_det};
use crate::monge_ampere::{log_sum_exp, solve, wasserstein_terms, default_route, LogConcaveDensity};
use crate::quadrature::gauss_hermite;
use crate::report::{Check, Provenance, Report};
use crate::rng::fill_normals;
use crate::transport::{GridSpec, TransportSolution};

/// Largest number of coordinates integrated by tensor Gauss-Hermite.
pub const MAX_QUADRATURE_DIMS: usize = 3;
pub const DEFAULT_GH_ORDER: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ConditioningMethod {
    ClosedFormQuadratic,
    SeparableExact,
    GaussHermite { order: usize },
    MonteCarlo { count: usize, seed: u64 },
}

/// `f_n(x₁..x_n) = −log E_y[e^{−f(x₁..x_n, y)}]`.
#[derive(Debug, Clone)]
pub struct ConditionedDensity {
    pub n: usize,
    pub base_dim: usize,
    pub method: ConditioningMethod,
    pub density: LogConcaveDensity,
}

impl ConditionedDensity {
    pub fn f_n(&self) -> &Functional {
        self.density.f()
    }
}

/// Integrates out coordinates `n..` of the base density. Quadratic and
/// separable functionals are conditioned exactly; custom functionals use a
/// Gauss-Hermite tensor rule over at most three integrated coordinates unless
/// a Monte-Carlo method is requested.
pub fn condition_density(
    density: &LogConcaveDensity,
    n: usize,
    method: Option<ConditioningMethod>,
) -> Result<ConditionedDensity> {
    let dim = density.dim();
    if n == 0 || n > dim {
        return Err(OtError::InvalidArgument(format!("conditioning dimension {n} outside 1..={dim}")));
    }
    let (f_n, method) = match density.f() {
        Functional::Constant(k) => (Functional::Constant(*k), ConditioningMethod::ClosedFormQuadratic),
        Functional::Linear(h) => {
            let tail = h.rows(n, dim - n).norm_squared();
            let a = DVector::from_iterator(n, h.iter().take(n).copied());
            (
                Functional::Quadratic { s: DMatrix::zeros(n, n), h: a, c: -0.5 * tail },
                ConditioningMethod::ClosedFormQuadratic,
            )
        }
        Functional::Quadratic { s, h, c } => (condition_quadratic(s, h, *c, n)?, ConditioningMethod::ClosedFormQuadratic),
        Functional::Separable { terms, offset } => {
            let mut off = *offset;
            for t in &terms[n..] {
                off -= crate::transport::log_normalizer_1d(t)?;
            }
            (
                Functional::Separable { terms: terms[..n].to_vec(), offset: off },
                ConditioningMethod::SeparableExact,
            )
        }
        Functional::Custom(_) => {
            let d = density.f().depends_on_first().clamp(n, dim);
            let method = method.unwrap_or(ConditioningMethod::GaussHermite { order: DEFAULT_GH_ORDER });
            let rule = match method {
                ConditioningMethod::GaussHermite { order } => {
                    if d - n > MAX_QUADRATURE_DIMS {
                        return Err(OtError::TooManyIntegratedDims { integrated: d - n });
                    }
                    tensor_rule(order, d - n)
                }
                ConditioningMethod::MonteCarlo { count, seed } => mc_rule(count, seed, d - n),
                _ => return Err(OtError::InvalidArgument("custom functionals need quadrature or Monte-Carlo".into())),
            };
            (conditioned_custom(density.f().clone(), n, d, dim, rule), method)
        }
    };
    let conditioned = match method {
        ConditioningMethod::MonteCarlo { count, seed } if n > MAX_QUADRATURE_DIMS => {
            LogConcaveDensity::with_monte_carlo(f_n, n, count, seed)?
        }
        _ => LogConcaveDensity::new(f_n, n)?,
    };
    Ok(ConditionedDensity { n, base_dim: dim, method, density: conditioned })
}

/// Gaussian integral of `e^{−f}` over the trailing block `b` of a quadratic:
/// a Schur complement plus a log-determinant constant.
fn condition_quadratic(s: &DMatrix<f64>, h: &DVector<f64>, c: f64, n: usize) -> Result<Functional> {
    let dim = h.len();
    let m = dim - n;
    if m == 0 {
        return Functional::quadratic(s.clone(), h.clone(), c);
    }
    let s_aa = s.view((0, 0), (n, n)).into_owned();
    let s_ab = s.view((0, n), (n, m)).into_owned();
    let s_bb = s.view((n, n), (m, m)).into_owned();
    let h_a = h.rows(0, n).into_owned();
    let h_b = h.rows(n, m).into_owned();
    let p = identity(m) + &s_bb;
    let p_inv = sym_inverse(&p).map_err(|_| OtError::NonIntegrableDensity("I + S_bb is not positive definite".into()))?;
    let s_n = &s_aa - &s_ab * &p_inv * s_ab.transpose();
    let h_n = &h_a - &s_ab * (&p_inv * &h_b);
    let c_n = c - 0.5 * h_b.dot(&(&p_inv * &h_b)) + 0.5 * sym_log_det(&p)?;
    Functional::quadratic(s_n, h_n, c_n)
}

/// Integration rule over the integrated coordinates: nodes (row-major) and log-weights.
struct Rule {
    nodes: Vec<f64>,
    log_w: Vec<f64>,
    dim: usize,
}

fn tensor_rule(order: usize, m: usize) -> Rule {
    let (x, w) = gauss_hermite(order);
    let q = x.len();
    let total = q.pow(m as u32);
    let mut nodes = Vec::with_capacity(total * m);
    let mut log_w = Vec::with_capacity(total);
    for idx in 0..total {
        let mut r = idx;
        let mut lw = 0.0;
        for _ in 0..m {
            let k = r % q;
            r /= q;
            nodes.push(x[k]);
            lw += w[k].ln();
        }
        log_w.push(lw);
    }
    Rule { nodes, log_w, dim: m }
}

fn mc_rule(count: usize, seed: u64, m: usize) -> Rule {
    let mut nodes = vec![0.0; count * m];
    if m > 0 {
        for (i, row) in nodes.chunks_mut(m).enumerate() {
            fill_normals(seed, i as u64, row);
        }
    }
    let count = if m == 0 { 1 } else { count };
    Rule { nodes, log_w: vec![-(count as f64).ln(); count], dim: m }
}

/// Self-normalized weights `∝ w_k e^{−f(a, y_k)}` and `log E_y[e^{−f}]`.
fn weights(f: &Functional, rule: &Rule, a: &[f64], d: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<f64>, f64) {
    let count = rule.log_w.len();
    let mut points = Vec::with_capacity(count);
    let mut logs = Vec::with_capacity(count);
    for k in 0..count {
        let mut x = vec![0.0; dim];
        x[..a.len()].copy_from_slice(a);
        x[a.len()..d].copy_from_slice(&rule.nodes[k * rule.dim..(k + 1) * rule.dim]);
        logs.push(rule.log_w[k] - f.value(&x));
        points.push(x);
    }
    let lse = log_sum_exp(&logs).unwrap_or(f64::NAN);
    let w = logs.iter().map(|l| (l - lse).exp()).collect();
    (points, w, lse)
}

fn conditioned_custom(f: Functional, n: usize, d: usize, dim: usize, rule: Rule) -> Functional {
    let rule = Arc::new(rule);
    let (f1, r1) = (f.clone(), rule.clone());
    let value = Arc::new(move |a: &[f64]| -weights(&f1, &r1, a, d, dim).2);
    let (f2, r2) = (f.clone(), rule.clone());
    let gradient = Arc::new(move |a: &[f64]| {
        let (pts, w, _) = weights(&f2, &r2, a, d, dim);
        let mut g = DVector::zeros(n);
        for (p, wk) in pts.iter().zip(&w) {
            g += f2.gradient(p).rows(0, n) * *wk;
        }
        g
    });
    let (f3, r3) = (f, rule);
    let hessian = Arc::new(move |a: &[f64]| {
        // ∇²f_n = E_w[∇²_aa f] − Cov_w(∇_a f)
        let (pts, w, _) = weights(&f3, &r3, a, d, dim);
        let mut mean_g = DVector::zeros(n);
        let mut second = DMatrix::zeros(n, n);
        let mut hess = DMatrix::zeros(n, n);
        for (p, wk) in pts.iter().zip(&w) {
            let g = f3.gradient(p).rows(0, n).into_owned();
            mean_g += &g * *wk;
            second += &g * g.transpose() * *wk;
            if let Ok(h) = f3.hessian(p) {
                hess += h.view((0, 0), (n, n)) * *wk;
            }
        }
        hess - (second - &mean_g * mean_g.transpose())
    });
    Functional::Custom(CustomFunctional {
        dim: n,
        f: value,
        gradient: Some(gradient),
        hessian: Some(hessian),
        allow_fd_fallback: false,
        convexity_lower_bound: None,
        depends_on_first: n,
    })
}

/// Normalization and log-concavity of a conditioned density.
pub fn conditioning_report(base: &LogConcaveDensity, cond: &ConditionedDensity, probes: &SampleBatch, tol: f64) -> Result<Report> {
    let mut report = Report::new(format!("conditioning-n{}", cond.n));
    let c_tol = match cond.method {
        ConditioningMethod::MonteCarlo { .. } => 1e-2,
        _ => 1e-8,
    };
    report.metric("log_c_n", cond.density.log_c());
    report.check(Check::le("log_c_gap", (cond.density.log_c() - base.log_c()).abs(), c_tol, Provenance::Quadrature));
    let sub = probes.truncated(probes.count());
    let pts: Vec<f64> = sub.rows().flat_map(|r| r[..cond.n].to_vec()).collect();
    let local = SampleBatch::from_points(pts, cond.n, probes.seed())?;
    let conv = check_one_convex(cond.f_n(), &local, tol)?;
    report.check(
        Check::ge("f_n_min_hessian_eigenvalue", conv.min_eigenvalue, -tol, Provenance::Algebraic).asserted_if(base.h_convex()),
    );
    Ok(report)
}

/// Solution of the conditioned problem viewed on the full space: zero
/// gradient on the integrated coordinates.
struct Lifted {
    n: usize,
    t: TransportSolution,
}

impl Lifted {
    fn grad(&self, x: &[f64]) -> DVector<f64> {
        let mut g = DVector::zeros(x.len());
        g.rows_mut(0, self.n).copy_from(&self.t.grad_phi(&x[..self.n]));
        g
    }

    fn hess(&self, x: &[f64]) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(x.len(), x.len());
        h.view_mut((0, 0), (self.n, self.n)).copy_from(&self.t.hess_phi(&x[..self.n]));
        h
    }
}

fn lifted_solutions(density: &LogConcaveDensity, dims: &[usize], grid: GridSpec) -> Result<Vec<(usize, Lifted)>> {
    let mut out = Vec::with_capacity(dims.len());
    for &n in dims {
        let cond = condition_density(density, n, None)?;
        out.push((n, Lifted { n, t: solve(&cond.density, grid)? }));
    }
    Ok(out)
}

/// `e_n = E|∇φ_n − ∇φ|²` for each requested `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergencePoint {
    pub n: usize,
    pub error: f64,
    pub se: f64,
}

pub fn convergence_study(
    density: &LogConcaveDensity,
    dims: &[usize],
    batch: &SampleBatch,
    grid: GridSpec,
) -> Result<(Vec<ConvergencePoint>, Report)> {
    let dim = density.dim();
    crate::error::check_dim(dim, batch.dim())?;
    let full = solve(density, grid)?;
    let lifted = lifted_solutions(density, dims, grid)?;
    let mut points = Vec::new();
    let mut samples: Vec<Vec<f64>> = Vec::new();
    for (n, l) in &lifted {
        let v = batch.par_map(|x| (l.grad(x) - full.grad_phi(x)).norm_squared());
        let est = McEstimate::from_values(&v)?;
        points.push(ConvergencePoint { n: *n, error: est.mean, se: est.se });
        samples.push(v);
    }
    let mut report = Report::new("convergence-study");
    for p in &points {
        report.metric_se(format!("e_{}", p.n), p.error, p.se);
    }
    let mut worst_increase = f64::NEG_INFINITY;
    for k in 1..points.len() {
        let diff: Vec<f64> = samples[k].iter().zip(&samples[k - 1]).map(|(a, b)| a - b).collect();
        let est = McEstimate::from_values(&diff)?;
        worst_increase = worst_increase.max(est.mean - 2.0 * est.se);
    }
    if points.len() > 1 {
        report.check(Check::le("max_increase_beyond_2se", worst_increase, 1e-14, Provenance::MonteCarlo));
    }
    if let Some(top) = points.iter().find(|p| p.n == dim) {
        report.check(Check::le("e_full_dimension", top.error, 1e-20, Provenance::Algebraic));
    }
    Ok((points, report))
}

/// `E‖∇²φ_n‖²_HS` and `E tr((I+∇²φ_n)^{−1}(∇²φ_n)²)` per `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HessianBoundPoint {
    pub n: usize,
    pub hs: f64,
    pub hs_se: f64,
    pub trace_term: f64,
    pub trace_se: f64,
    pub max_op_norm: f64,
}

pub fn hessian_bound_study(
    density: &LogConcaveDensity,
    dims: &[usize],
    batch: &SampleBatch,
    grid: GridSpec,
) -> Result<(Vec<HessianBoundPoint>, Report)> {
    let dim = density.dim();
    crate::error::check_dim(dim, batch.dim())?;
    let mut all_dims: Vec<usize> = dims.to_vec();
    if !all_dims.contains(&dim) {
        all_dims.push(dim);
    }
    let lifted = lifted_solutions(density, &all_dims, grid)?;
    let mut points = Vec::new();
    for (n, l) in &lifted {
        let rows = batch.par_map(|x| -> Result<(f64, f64, f64)> {
            let h = l.hess(x);
            let inv = sym_inverse(&(identity(dim) + &h))?;
            let eig = sym_eigen(&h).eigenvalues;
            Ok((h.norm_squared(), (inv * &h * &h).trace(), eig.amax()))
        });
        let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        let hs = McEstimate::from_values(&rows.iter().map(|r| r.0).collect::<Vec<_>>())?;
        let tr = McEstimate::from_values(&rows.iter().map(|r| r.1).collect::<Vec<_>>())?;
        points.push(HessianBoundPoint {
            n: *n,
            hs: hs.mean,
            hs_se: hs.se,
            trace_term: tr.mean,
            trace_se: tr.se,
            max_op_norm: rows.iter().map(|r| r.2).fold(0.0, f64::max),
        });
    }
    let top = points.iter().find(|p| p.n == dim).cloned().expect("top dimension included");
    let asserted = density.h_convex();
    let mut report = Report::new("hessian-bound-study");
    for p in points.iter().filter(|p| dims.contains(&p.n)) {
        report.metric_se(format!("hs_{}", p.n), p.hs, p.hs_se);
        report.metric_se(format!("trace_term_{}", p.n), p.trace_term, p.trace_se);
        report.check(
            Check::le(format!("hs_{}_bounded", p.n), p.hs, top.hs + 2.0 * (p.hs_se + top.hs_se) + 1e-14, Provenance::MonteCarlo)
                .asserted_if(asserted),
        );
        report.check(
            Check::le(
                format!("trace_term_{}_bounded", p.n),
                p.trace_term,
                top.trace_term + 2.0 * (p.trace_se + top.trace_se) + 1e-14,
                Provenance::MonteCarlo,
            )
            .asserted_if(asserted),
        );
        if p.max_op_norm <= 1.0 {
            report.check(
                Check::le(format!("hs_{}_below_trace_term", p.n), p.hs, p.trace_term + 1e-14, Provenance::MonteCarlo)
                    .asserted_if(asserted),
            );
        }
    }
    Ok((points, report))
}

/// `d²`, `2E[L log L]` and the defect `−2E[log det₂(I+∇²φ)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TalagrandDefect {
    pub d2: f64,
    pub twice_entropy: f64,
    pub defect: f64,
}

pub fn talagrand_defect(density: &LogConcaveDensity, batch: &SampleBatch, grid: GridSpec) -> Result<(TalagrandDefect, Report)> {
    let t = solve(density, grid)?;
    let route = default_route(&t, density);
    let (w, se) = wasserstein_terms(&t, density, route, batch)?;
    let out = TalagrandDefect { d2: 2.0 * w.half_d2, twice_entropy: 2.0 * w.entropy, defect: -2.0 * w.log_det2 };
    let tol = match route {
        crate::monge_ampere::Route::ClosedForm => 1e-12,
        crate::monge_ampere::Route::Quadrature => 2e-6,
        crate::monge_ampere::Route::MonteCarlo => 8.0 * (se[0] * se[0] + se[1] * se[1] + se[2] * se[2]).sqrt(),
    };
    let asserted = density.hypotheses_hold();
    let mut report = Report::new("talagrand-defect");
    report.metric("d2", out.d2);
    report.metric("twice_entropy", out.twice_entropy);
    report.metric("defect", out.defect);
    report.check(Check::le("restatement_gap", (out.d2 + out.defect - out.twice_entropy).abs(), tol, Provenance::Quadrature).asserted_if(asserted));
    report.check(Check::le("d2_minus_twice_entropy", out.d2 - out.twice_entropy, 1e-12, Provenance::Quadrature).asserted_if(asserted));
    report.check(Check::ge("defect", out.defect, -1e-12, Provenance::Quadrature).asserted_if(asserted));
    Ok((out, report))
}

/// `E[exp(t|∇φ_n|²)]` for each `n`. For affine gradients the closed-form
/// domain `I − 2tN² ≻ 0` decides divergence before any sampling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpMoment {
    pub n: usize,
    pub estimate: Option<f64>,
    pub se: f64,
    pub closed_form: Option<f64>,
    pub diverges: bool,
}

pub fn exp_integrability_check(
    density: &LogConcaveDensity,
    dims: &[usize],
    t: f64,
    batch: &SampleBatch,
    grid: GridSpec,
) -> Result<(Vec<ExpMoment>, Report)> {
    let dim = density.dim();
    crate::error::check_dim(dim, batch.dim())?;
    let mut all_dims: Vec<usize> = dims.to_vec();
    if !all_dims.contains(&dim) {
        all_dims.push(dim);
    }
    let lifted = lifted_solutions(density, &all_dims, grid)?;
    let mut moments = Vec::new();
    for (n, l) in &lifted {
        let closed = match &l.t {
            TransportSolution::Quadratic(q) => {
                let a = identity(q.n.nrows()) - &q.n * &q.n * (2.0 * t);
                let min = sym_eigen(&a).eigenvalues.min();
                if min <= 0.0 {
                    moments.push(ExpMoment { n: *n, estimate: None, se: f64::NAN, closed_form: None, diverges: true });
                    continue;
                }
                let a_inv = sym_inverse(&a)?;
                let nb = &q.n * &q.b;
                Some(
                    (-0.5 * sym_log_det(&a)? + t * q.b.norm_squared() + 2.0 * t * t * nb.dot(&(&a_inv * &nb))).exp(),
                )
            }
            _ => None,
        };
        let v = batch.par_map(|x| (t * l.grad(x).norm_squared()).exp());
        let (estimate, se, diverges) = match McEstimate::from_values(&v) {
            Ok(e) => (Some(e.mean), e.se, false),
            Err(OtError::NonFinite { .. }) => (None, f64::NAN, true),
            Err(e) => return Err(e),
        };
        moments.push(ExpMoment { n: *n, estimate, se, closed_form: closed, diverges });
    }
    let mut report = Report::new("exp-integrability");
    report.metric("t", t);
    let top = moments.iter().find(|m| m.n == dim).cloned().expect("top dimension included");
    for m in moments.iter().filter(|m| dims.contains(&m.n)) {
        if let Some(c) = m.closed_form {
            report.metric(format!("closed_form_{}", m.n), c);
        }
        report.check(Check::le(format!("diverges_{}", m.n), if m.diverges { 1.0 } else { 0.0 }, 0.0, Provenance::ClosedForm));
        if let (Some(e), Some(top_e)) = (m.estimate, top.estimate) {
            report.metric_se(format!("estimate_{}", m.n), e, m.se);
            report.check(Check::le(
                format!("bounded_by_top_{}", m.n),
                e,
                top_e + 4.0 * (m.se * m.se + top.se * top.se).sqrt() + 1e-14,
                Provenance::MonteCarlo,
            ));
        }
    }
    Ok((moments, report))
}

/// Probe batch in the base dimension for conditioning diagnostics.
pub fn default_probes(dim: usize, seed: u64) -> Result<SampleBatch> {
    GaussianSpace::new(dim)?.sample(256, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::ScalarFn;
    use approx::assert_relative_eq;

    fn coupled() -> LogConcaveDensity {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        LogConcaveDensity::new(Functional::quadratic(s, DVector::zeros(2), 0.0).unwrap(), 2).unwrap()
    }

    #[test]
    fn coupled_schur_complement() {
        // f₁ = (7/16)x² + ½ log 2
        let c = condition_density(&coupled(), 1, None).unwrap();
        let Functional::Quadratic { s, h, c: c0 } = c.f_n() else { panic!() };
        assert_relative_eq!(s[(0, 0)], 0.875, epsilon = 1e-15);
        assert_eq!(h[0], 0.0);
        assert_relative_eq!(*c0, 0.5 * 2f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(c.density.log_c(), coupled().log_c(), epsilon = 1e-14);
    }

    #[test]
    fn separable_conditioning_keeps_c() {
        let f = Functional::separable(vec![ScalarFn::half_square(3.0), ScalarFn::half_square(3.0)]);
        let d = LogConcaveDensity::new(f, 2).unwrap();
        let c = condition_density(&d, 1, None).unwrap();
        assert_relative_eq!(c.density.c(), 0.25, epsilon = 1e-13);
        assert_relative_eq!(d.c(), 0.25, epsilon = 1e-13);
    }

    #[test]
    fn custom_matches_closed_form() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let s2 = s.clone();
        let f = Functional::Custom(CustomFunctional {
            dim: 2,
            f: Arc::new(move |x: &[f64]| {
                let v = DVector::from_column_slice(x);
                0.5 * v.dot(&(&s2 * &v))
            }),
            gradient: Some(Arc::new(move |x: &[f64]| &s * DVector::from_column_slice(x))),
            hessian: None,
            allow_fd_fallback: true,
            convexity_lower_bound: Some(0.5),
            depends_on_first: 2,
        });
        let d = LogConcaveDensity::new(f, 2).unwrap();
        let c = condition_density(&d, 1, None).unwrap();
        for &x in &[0.0, 0.8, -2.0] {
            assert_relative_eq!(c.f_n().value(&[x]), 0.4375 * x * x + 0.5 * 2f64.ln(), epsilon = 1e-10);
            assert_relative_eq!(c.f_n().hessian(&[x]).unwrap()[(0, 0)], 0.875, epsilon = 1e-6);
        }
        assert_relative_eq!(c.density.log_c(), coupled().log_c(), epsilon = 1e-10);
    }

    #[test]
    fn too_many_integrated_dims() {
        let f = Functional::Custom(CustomFunctional {
            dim: 5,
            f: Arc::new(|x: &[f64]| 0.5 * x.iter().map(|v| v * v).sum::<f64>()),
            gradient: None,
            hessian: None,
            allow_fd_fallback: true,
            convexity_lower_bound: Some(1.0),
            depends_on_first: 5,
        });
        let d = LogConcaveDensity::with_monte_carlo(f, 5, 1000, 1).unwrap();
        assert!(matches!(condition_density(&d, 1, None), Err(OtError::TooManyIntegratedDims { integrated: 4 })));
    }

    #[test]
    fn separable_convergence_numbers() {
        let f = Functional::separable(vec![ScalarFn::half_square(3.0), ScalarFn::half_square(3.0)]);
        let d = LogConcaveDensity::new(f, 2).unwrap();
        let batch = GaussianSpace::new(2).unwrap().sample(20_000, 5).unwrap();
        let grid = GridSpec { points: 1025, ..GridSpec::default() };
        let (pts, r) = convergence_study(&d, &[1, 2], &batch, grid).unwrap();
        assert!((pts[0].error - 0.25).abs() < 4.0 * pts[0].se);
        assert_eq!(pts[1].error, 0.0);
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn canonical_exp_moment() {
        let d = LogConcaveDensity::new(Functional::quadratic(DMatrix::from_element(1, 1, 3.0), DVector::zeros(1), 0.0).unwrap(), 1)
            .unwrap();
        let batch = GaussianSpace::new(1).unwrap().sample(50_000, 2).unwrap();
        let (m, r) = exp_integrability_check(&d, &[1], 0.1, &batch, GridSpec::default()).unwrap();
        assert_relative_eq!(m[0].closed_form.unwrap(), 0.95f64.powf(-0.5), epsilon = 1e-14);
        assert!(r.passed());
        let (m, r) = exp_integrability_check(&d, &[1], 3.0, &batch, GridSpec::default()).unwrap();
        assert!(m[0].diverges);
        assert!(!r.passed());
    }

    #[test]
    fn canonical_hessian_bound() {
        let d = LogConcaveDensity::new(Functional::quadratic(DMatrix::from_element(1, 1, 3.0), DVector::zeros(1), 0.0).unwrap(), 1)
            .unwrap();
        let batch = GaussianSpace::new(1).unwrap().sample(100, 2).unwrap();
        let (p, r) = hessian_bound_study(&d, &[1], &batch, GridSpec::default()).unwrap();
        assert_relative_eq!(p[0].hs, 0.25, epsilon = 1e-15);
        assert_relative_eq!(p[0].trace_term, 0.5, epsilon = 1e-15);
        assert!(r.passed());
    }
}
