//! Transport on a discretized classical Wiener space.
//!
//! Paths live on a time grid `0 = t₀ < … < t_m = 1` and are described by
//! their increments `ΔWᵢ ~ N(0, Δtᵢ)`. A path functional `f(ΔW)` is moved to
//! the standardized coordinates `zᵢ = ΔWᵢ/√Δtᵢ`, solved there, and read back
//! as a path map `T`. The drift `ξᵢ = E_ν[D_{tᵢ}f | F_{tᵢ}]` is evaluated along
//! `T`, which gives the Brownian part `B^T` and the Itô form of `Λ`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::det2::{log_det2, HsPerturbation};
use crate::error::{check_dim, OtError, Result};
use crate::gaussian::{Functional, McEstimate};
use crate::linalg::{random_orthogonal, symmetrize};
use crate::monge_ampere::{log_sum_exp, solve, LogConcaveDensity};
use crate::polar::{ks_critical, ks_two_sample};
use crate::report::{Check, Provenance, Report};
use crate::rng::{derive_seed, fill_normals, stream};
use crate::transport::{GridSpec, TransportSolution};

pub const DEFAULT_STEPS: usize = 32;
pub const DEFAULT_CONTINUATIONS: usize = 500;
pub const DEFAULT_ESS_FLOOR: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(OtError::InvalidArgument("time grid needs at least one step".into()));
        }
        let mut times: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64).collect();
        times[m] = 1.0;
        Ok(Self { times })
    }

    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || times[0] != 0.0 || *times.last().unwrap() != 1.0 {
            return Err(OtError::InvalidArgument("time grid must run from 0 to 1".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(OtError::InvalidArgument("time grid must be strictly increasing".into()));
        }
        Ok(Self { times })
    }

    pub fn m(&self) -> usize {
        self.times.len() - 1
    }
    pub fn times(&self) -> &[f64] {
        &self.times
    }
    pub fn dt(&self, i: usize) -> f64 {
        self.times[i + 1] - self.times[i]
    }
    pub fn dts(&self) -> Vec<f64> {
        self.times.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Increments of `count` Brownian paths, row `j` drawn from stream `(seed, j)`.
#[derive(Debug, Clone)]
pub struct PathBatch {
    grid: TimeGrid,
    increments: Vec<f64>,
    count: usize,
    seed: u64,
}

impl PathBatch {
    pub fn simulate(grid: &TimeGrid, count: usize, seed: u64) -> Result<Self> {
        if count == 0 {
            return Err(OtError::InvalidArgument("path batch must be non-empty".into()));
        }
        let m = grid.m();
        let sd: Vec<f64> = grid.dts().iter().map(|d| d.sqrt()).collect();
        let mut increments = vec![0.0; count * m];
        increments.par_chunks_mut(m).enumerate().for_each(|(j, row)| {
            fill_normals(seed, j as u64, row);
            for (v, s) in row.iter_mut().zip(&sd) {
                *v *= s;
            }
        });
        Ok(Self { grid: grid.clone(), increments, count, seed })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    pub fn count(&self) -> usize {
        self.count
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn increments(&self, j: usize) -> &[f64] {
        let m = self.grid.m();
        &self.increments[j * m..(j + 1) * m]
    }

    /// `(W_{t₁}, …, W_{t_m})` for path `j`.
    pub fn path(&self, j: usize) -> Vec<f64> {
        cumulative(self.increments(j))
    }

    /// Per-step empirical variance against `Δtᵢ`, in units of its standard error.
    pub fn variance_z_scores(&self) -> Vec<f64> {
        (0..self.grid.m())
            .map(|i| {
                let v: Vec<f64> = (0..self.count).map(|j| self.increments(j)[i].powi(2)).collect();
                let e = McEstimate::from_values(&v).expect("finite increments");
                (e.mean - self.grid.dt(i)) / e.se
            })
            .collect()
    }
}

pub fn cumulative(increments: &[f64]) -> Vec<f64> {
    increments
        .iter()
        .scan(0.0, |acc, d| {
            *acc += d;
            Some(*acc)
        })
        .collect()
}

/// Evaluator on increments and its partials `∂f/∂ΔWᵢ = D_{tᵢ}f`.
#[derive(Clone)]
pub struct CustomPathFunctional {
    pub m: usize,
    pub f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub partials: Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>,
}

impl std::fmt::Debug for CustomPathFunctional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CustomPathFunctional").field("m", &self.m).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum PathFunctional {
    /// `f = a·Σ ḣᵢ ΔWᵢ`
    Linear { a: f64, hdot: Vec<f64> },
    /// `f = ½ΔWᵀSΔW + hᵀΔW + c`
    Quadratic { s: DMatrix<f64>, h: DVector<f64>, c: f64 },
    Custom(CustomPathFunctional),
}

impl PathFunctional {
    /// `f = a·W₁`
    pub fn linear_endpoint(a: f64, m: usize) -> Self {
        PathFunctional::Linear { a, hdot: vec![1.0; m] }
    }

    /// `f = (s/2)·W₁²`
    pub fn quadratic_endpoint(s: f64, m: usize) -> Self {
        PathFunctional::Quadratic { s: DMatrix::from_element(m, m, s), h: DVector::zeros(m), c: 0.0 }
    }

    pub fn m(&self) -> usize {
        match self {
            PathFunctional::Linear { hdot, .. } => hdot.len(),
            PathFunctional::Quadratic { h, .. } => h.len(),
            PathFunctional::Custom(c) => c.m,
        }
    }

    pub fn value(&self, dw: &[f64]) -> f64 {
        match self {
            PathFunctional::Linear { a, hdot } => a * hdot.iter().zip(dw).map(|(h, d)| h * d).sum::<f64>(),
            PathFunctional::Quadratic { s, h, c } => {
                let v = DVector::from_column_slice(dw);
                0.5 * v.dot(&(s * &v)) + h.dot(&v) + c
            }
            PathFunctional::Custom(c) => (c.f)(dw),
        }
    }

    /// `(D_{t₁}f, …, D_{t_m}f)`, constant on each grid cell.
    pub fn partials(&self, dw: &[f64]) -> DVector<f64> {
        match self {
            PathFunctional::Linear { a, hdot } => DVector::from_iterator(hdot.len(), hdot.iter().map(|h| a * h)),
            PathFunctional::Quadratic { s, h, .. } => s * DVector::from_column_slice(dw) + h,
            PathFunctional::Custom(c) => (c.partials)(dw),
        }
    }

    /// `(S, h, c)` in increment coordinates for the closed-form variants.
    pub fn quadratic_parts(&self) -> Option<(DMatrix<f64>, DVector<f64>, f64)> {
        match self {
            PathFunctional::Linear { a, hdot } => {
                let m = hdot.len();
                Some((DMatrix::zeros(m, m), DVector::from_iterator(m, hdot.iter().map(|h| a * h)), 0.0))
            }
            PathFunctional::Quadratic { s, h, c } => Some((s.clone(), h.clone(), *c)),
            PathFunctional::Custom(_) => None,
        }
    }

    /// The same functional in standardized coordinates `zᵢ = ΔWᵢ/√Δtᵢ`.
    pub fn in_standard_coordinates(&self, grid: &TimeGrid) -> Result<Functional> {
        check_dim(grid.m(), self.m())?;
        let sd: Vec<f64> = grid.dts().iter().map(|d| d.sqrt()).collect();
        match self {
            PathFunctional::Linear { a, hdot } => {
                Ok(Functional::Linear(DVector::from_iterator(sd.len(), hdot.iter().zip(&sd).map(|(h, s)| a * h * s))))
            }
            PathFunctional::Quadratic { s, h, c } => {
                let d = DVector::from_column_slice(&sd);
                let sz = DMatrix::from_fn(sd.len(), sd.len(), |i, j| s[(i, j)] * d[i] * d[j]);
                Functional::quadratic(symmetrize(&sz), h.component_mul(&d), *c)
            }
            PathFunctional::Custom(_) => Err(OtError::UnsolvableRegime(
                "custom path functionals have no transport solver; only their drift is estimated".into(),
            )),
        }
    }
}

/// The increment-space solution read as a path map.
#[derive(Debug, Clone)]
pub struct PathTransport {
    pub grid: TimeGrid,
    pub density: LogConcaveDensity,
    pub solution: TransportSolution,
    sd: Vec<f64>,
}

impl PathTransport {
    /// `ΔT` for a path given by its increments.
    pub fn map_increments(&self, dw: &[f64]) -> Vec<f64> {
        let z: Vec<f64> = dw.iter().zip(&self.sd).map(|(d, s)| d / s).collect();
        let t = self.solution.map(&z);
        t.iter().zip(&self.sd).map(|(v, s)| v * s).collect()
    }

    /// `(T_{t₁}, …, T_{t_m})`.
    pub fn path(&self, dw: &[f64]) -> Vec<f64> {
        cumulative(&self.map_increments(dw))
    }

    pub fn to_standard(&self, dw: &[f64]) -> Vec<f64> {
        dw.iter().zip(&self.sd).map(|(d, s)| d / s).collect()
    }

    pub fn from_standard(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.sd).map(|(v, s)| v * s).collect()
    }
}

pub fn solve_path_transport(f: &PathFunctional, grid: &TimeGrid) -> Result<PathTransport> {
    let fz = f.in_standard_coordinates(grid)?;
    let density = LogConcaveDensity::new(fz, grid.m())?;
    let solution = solve(&density, GridSpec::default())?;
    Ok(PathTransport { grid: grid.clone(), density, solution, sd: grid.dts().iter().map(|d| d.sqrt()).collect() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DriftMethod {
    ClosedForm,
    NestedMc { continuations: usize, ess_floor: f64, seed: u64 },
}

impl DriftMethod {
    pub fn nested(seed: u64) -> Self {
        DriftMethod::NestedMc { continuations: DEFAULT_CONTINUATIONS, ess_floor: DEFAULT_ESS_FLOOR, seed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftEstimate {
    pub value: f64,
    pub se: f64,
    pub ess: Option<f64>,
}

/// `E_ν[D_{t_index}f | F]` where `F` is generated by the known increments
/// `prefix` (the first `prefix.len()` cells). Only the prefix is visible to
/// the estimator. `stream_id` keys the continuation draws of the nested
/// Monte-Carlo method.
pub fn conditional_drift(
    f: &PathFunctional,
    grid: &TimeGrid,
    prefix: &[f64],
    index: usize,
    method: DriftMethod,
    stream_id: u64,
) -> Result<DriftEstimate> {
    let m = grid.m();
    check_dim(m, f.m())?;
    if index >= m || prefix.len() > m {
        return Err(OtError::InvalidArgument(format!("drift index {index} or prefix {} outside grid", prefix.len())));
    }
    match method {
        DriftMethod::ClosedForm => {
            let (s, h, _) = f
                .quadratic_parts()
                .ok_or_else(|| OtError::InvalidArgument("closed-form drift needs a linear or quadratic functional".into()))?;
            let (coef, constant) = affine_conditional(&s, &h, &grid.dts(), prefix.len(), index)?;
            let value = coef.iter().zip(prefix).map(|(c, a)| c * a).sum::<f64>() + constant;
            Ok(DriftEstimate { value, se: 0.0, ess: None })
        }
        DriftMethod::NestedMc { continuations, ess_floor, seed } => {
            nested_drift(f, grid, prefix, index, continuations, ess_floor, seed, stream_id)
        }
    }
}

/// Coefficients of the affine map `prefix ↦ E_ν[(SΔW + h)ᵢ | first k cells]`.
/// The unknown cells are Gaussian with precision `diag(1/Δt) + S_YY`.
fn affine_conditional(s: &DMatrix<f64>, h: &DVector<f64>, dt: &[f64], k: usize, i: usize) -> Result<(DVector<f64>, f64)> {
    let m = dt.len();
    let y = m - k;
    let s_ik = DVector::from_iterator(k, (0..k).map(|j| s[(i, j)]));
    if y == 0 {
        return Ok((s_ik, h[i]));
    }
    let mut p = s.view((k, k), (y, y)).into_owned();
    for j in 0..y {
        p[(j, j)] += 1.0 / dt[k + j];
    }
    let chol = p.cholesky().ok_or(OtError::NotPositiveDefinite { min_eigenvalue: f64::NAN })?;
    let s_iy = DVector::from_iterator(y, (0..y).map(|j| s[(i, k + j)]));
    let w = chol.solve(&s_iy);
    let s_yk = s.view((k, 0), (y, k));
    let coef = s_ik - s_yk.transpose() * &w;
    let constant = h[i] - w.dot(&h.rows(k, y));
    Ok((coef, constant))
}

/// `∂ξᵢ/∂u` at `u = 0`, where `u` is the part of `ΔWᵢ` already revealed.
fn affine_slope(s: &DMatrix<f64>, dt: &[f64], i: usize) -> Result<f64> {
    let m = dt.len();
    let y = m - i;
    let mut p = s.view((i, i), (y, y)).into_owned();
    for j in 0..y {
        p[(j, j)] += 1.0 / dt[i + j];
    }
    let chol = p.cholesky().ok_or(OtError::NotPositiveDefinite { min_eigenvalue: f64::NAN })?;
    let s_iy = DVector::from_iterator(y, (0..y).map(|j| s[(i, i + j)]));
    Ok(s[(i, i)] - s_iy.dot(&chol.solve(&s_iy)))
}

#[allow(clippy::too_many_arguments)]
fn nested_drift(
    f: &PathFunctional,
    grid: &TimeGrid,
    prefix: &[f64],
    index: usize,
    continuations: usize,
    ess_floor: f64,
    seed: u64,
    stream_id: u64,
) -> Result<DriftEstimate> {
    let m = grid.m();
    let k = prefix.len();
    let sd: Vec<f64> = grid.dts()[k..].iter().map(|d| d.sqrt()).collect();
    let mut rng_index = stream_id.wrapping_mul(m as u64 + 1).wrapping_add(k as u64);
    if k == m {
        rng_index = u64::MAX;
    }
    let mut rng = stream(seed, rng_index);
    let count = if k == m { 1 } else { continuations };
    let mut log_w = Vec::with_capacity(count);
    let mut g = Vec::with_capacity(count);
    let mut path = prefix.to_vec();
    path.resize(m, 0.0);
    for _ in 0..count {
        for (j, s) in sd.iter().enumerate() {
            let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
            path[k + j] = z * s;
        }
        log_w.push(-f.value(&path));
        g.push(f.partials(&path)[index]);
    }
    let lse = log_sum_exp(&log_w).ok_or_else(|| OtError::NonFinite { index: 0, value: f64::NAN })?;
    let w: Vec<f64> = log_w.iter().map(|l| (l - lse).exp()).collect();
    let ess = 1.0 / w.iter().map(|v| v * v).sum::<f64>();
    if k < m && ess < ess_floor {
        return Err(OtError::DegenerateWeights { ess, floor: ess_floor });
    }
    let value: f64 = w.iter().zip(&g).map(|(w, g)| w * g).sum();
    let se = w.iter().zip(&g).map(|(w, g)| (w * (g - value)).powi(2)).sum::<f64>().sqrt();
    Ok(DriftEstimate { value, se, ess: Some(ess) })
}

/// Precomputed affine drifts `ξᵢ` (left: first `i` cells known; right: first
/// `i+1`) and their vertical slopes.
#[derive(Debug, Clone)]
struct AffineDrift {
    left: Vec<(DVector<f64>, f64)>,
    right: Vec<(DVector<f64>, f64)>,
    slope: Vec<f64>,
}

impl AffineDrift {
    fn build(f: &PathFunctional, grid: &TimeGrid) -> Result<Self> {
        let (s, h, _) = f.quadratic_parts().ok_or_else(|| OtError::InvalidArgument("affine drift needs a closed form".into()))?;
        let dt = grid.dts();
        let m = dt.len();
        let rows: Vec<_> = (0..m)
            .into_par_iter()
            .map(|i| -> Result<_> {
                Ok((affine_conditional(&s, &h, &dt, i, i)?, affine_conditional(&s, &h, &dt, i + 1, i)?, affine_slope(&s, &dt, i)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = AffineDrift { left: Vec::with_capacity(m), right: Vec::with_capacity(m), slope: Vec::with_capacity(m) };
        for (l, r, sl) in rows {
            out.left.push(l);
            out.right.push(r);
            out.slope.push(sl);
        }
        Ok(out)
    }

    fn eval(coef: &(DVector<f64>, f64), prefix: &[f64]) -> f64 {
        coef.0.iter().zip(prefix).map(|(c, a)| c * a).sum::<f64>() + coef.1
    }
}

/// A solved path problem with its drift evaluator.
#[derive(Debug, Clone)]
pub struct ItoModel {
    pub f: PathFunctional,
    pub transport: PathTransport,
    pub method: DriftMethod,
    affine: Option<AffineDrift>,
}

/// Everything computed along one simulated path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItoPath {
    pub t_increments: Vec<f64>,
    pub xi_left: Vec<f64>,
    pub xi_right: Vec<f64>,
    pub b_increments: Vec<f64>,
    /// Itô exponential with the iterated-integral correction.
    pub log_lambda: f64,
    /// Plain left-point Itô exponential.
    pub log_lambda_euler: f64,
    /// `log(c·e^{f∘T})`
    pub log_lambda_exact: f64,
    /// `f∘T + ½∫ξ²∘T dt`
    pub free_energy_sample: f64,
}

impl ItoModel {
    pub fn new(f: PathFunctional, grid: &TimeGrid, method: DriftMethod) -> Result<Self> {
        let transport = solve_path_transport(&f, grid)?;
        let affine = match method {
            DriftMethod::ClosedForm => Some(AffineDrift::build(&f, grid)?),
            DriftMethod::NestedMc { .. } => None,
        };
        Ok(Self { f, transport, method, affine })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.transport.grid
    }

    pub fn log_c(&self) -> f64 {
        self.transport.density.log_c()
    }

    /// Left and right drift values along a path and the vertical slopes
    /// (zero for the nested estimator).
    fn drifts(&self, incr: &[f64], path_id: u64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let m = self.grid().m();
        match &self.affine {
            Some(a) => Ok((
                (0..m).map(|i| AffineDrift::eval(&a.left[i], &incr[..i])).collect(),
                (0..m).map(|i| AffineDrift::eval(&a.right[i], &incr[..=i])).collect(),
                a.slope.clone(),
            )),
            None => {
                let mut left = Vec::with_capacity(m);
                let mut right = Vec::with_capacity(m);
                for i in 0..m {
                    left.push(conditional_drift(&self.f, self.grid(), &incr[..i], i, self.method, path_id)?.value);
                    right.push(conditional_drift(&self.f, self.grid(), &incr[..=i], i, self.method, path_id)?.value);
                }
                Ok((left, right, vec![0.0; m]))
            }
        }
    }

    /// `X_t = W_t + ∫₀ᵗ ξ(W) dτ` on a path given by increments.
    pub fn x_map(&self, incr: &[f64], path_id: u64) -> Result<Vec<f64>> {
        let (left, right, _) = self.drifts(incr, path_id)?;
        let dt = self.grid().dts();
        Ok((0..incr.len()).map(|i| incr[i] + 0.5 * (left[i] + right[i]) * dt[i]).collect())
    }

    pub fn simulate_path(&self, dw: &[f64], path_id: u64) -> Result<ItoPath> {
        let t = self.transport.map_increments(dw);
        let (xi_left, xi_right, slope) = self.drifts(&t, path_id)?;
        let dt = self.grid().dts();
        let b = extract_brownian_part(&t, &xi_left, &xi_right, &dt);
        let mut log_lambda = 0.0;
        let mut log_lambda_euler = 0.0;
        let mut energy = 0.0;
        for i in 0..t.len() {
            let stoch = xi_left[i] * b[i];
            let half_sq = 0.5 * xi_left[i] * xi_left[i] * dt[i];
            log_lambda_euler += stoch - half_sq;
            log_lambda += stoch + 0.5 * slope[i] * (b[i] * b[i] - dt[i]) - half_sq;
            energy += 0.25 * (xi_left[i] * xi_left[i] + xi_right[i] * xi_right[i]) * dt[i];
        }
        let f_t = self.f.value(&t);
        Ok(ItoPath {
            t_increments: t,
            xi_left,
            xi_right,
            b_increments: b,
            log_lambda,
            log_lambda_euler,
            log_lambda_exact: self.log_c() + f_t,
            free_energy_sample: f_t + energy,
        })
    }

    pub fn simulate(&self, batch: &PathBatch) -> Result<Vec<ItoPath>> {
        check_dim(self.grid().m(), batch.grid().m())?;
        (0..batch.count())
            .into_par_iter()
            .map(|j| self.simulate_path(batch.increments(j), j as u64))
            .collect()
    }
}

/// `ΔB^Tᵢ = ΔTᵢ + ½(ξᵢ⁻ + ξᵢ⁺)Δtᵢ`, the drift integral by the trapezoid of
/// its values at both ends of the cell.
pub fn extract_brownian_part(t_increments: &[f64], xi_left: &[f64], xi_right: &[f64], dt: &[f64]) -> Vec<f64> {
    (0..t_increments.len())
        .map(|i| t_increments[i] + 0.5 * (xi_left[i] + xi_right[i]) * dt[i])
        .collect()
}

/// `Λ` along one path from the Itô exponential.
pub fn ito_jacobian(model: &ItoModel, dw: &[f64], path_id: u64) -> Result<f64> {
    Ok(model.simulate_path(dw, path_id)?.log_lambda.exp())
}

/// Per-step mean, variance and lag-one correlation of `B^T` increments.
pub fn brownianity_report(paths: &[ItoPath], grid: &TimeGrid) -> Result<Report> {
    let m = grid.m();
    let n = paths.len();
    let mut report = Report::new("brownianity");
    let (mut worst_mean, mut worst_var, mut worst_corr) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..m {
        let col: Vec<f64> = paths.iter().map(|p| p.b_increments[i]).collect();
        let mean = McEstimate::from_values(&col)?;
        worst_mean = worst_mean.max(mean.mean.abs() / mean.se);
        let sq: Vec<f64> = col.iter().map(|v| v * v).collect();
        let var = McEstimate::from_values(&sq)?;
        worst_var = worst_var.max((var.mean - grid.dt(i)).abs() / var.se);
        if i + 1 < m {
            let next: Vec<f64> = paths.iter().map(|p| p.b_increments[i + 1]).collect();
            let corr = correlation(&col, &next);
            worst_corr = worst_corr.max(corr.abs() * (n as f64).sqrt());
        }
    }
    report.metric("paths", n as f64);
    report.check(Check::le("max_mean_z", worst_mean, 4.0, Provenance::MonteCarlo));
    report.check(Check::le("max_variance_z", worst_var, 4.0, Provenance::MonteCarlo));
    if m > 1 {
        report.check(Check::le("max_lag1_correlation_z", worst_corr, 4.0, Provenance::MonteCarlo));
    }
    Ok(report)
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

/// `Λ` from the Itô exponential against `c·e^{f∘T}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaErrors {
    pub max_rel: f64,
    pub mean_rel: f64,
    pub mean_rel_se: f64,
    pub mean_rel_euler: f64,
}

pub fn lambda_errors(paths: &[ItoPath]) -> Result<LambdaErrors> {
    let rel: Vec<f64> = paths.iter().map(|p| (p.log_lambda - p.log_lambda_exact).exp_m1().abs()).collect();
    let euler: Vec<f64> = paths.iter().map(|p| (p.log_lambda_euler - p.log_lambda_exact).exp_m1().abs()).collect();
    let est = McEstimate::from_values(&rel)?;
    Ok(LambdaErrors {
        max_rel: rel.iter().copied().fold(0.0, f64::max),
        mean_rel: est.mean,
        mean_rel_se: est.se,
        mean_rel_euler: McEstimate::from_values(&euler)?.mean,
    })
}

/// Mean relative `Λ` error as the grid is refined. Each doubling must cut the
/// error to at most `max_ratio` of the previous value.
pub fn lambda_convergence(
    build: impl Fn(usize) -> PathFunctional,
    steps: &[usize],
    count: usize,
    seed: u64,
    max_ratio: f64,
) -> Result<(Vec<(usize, LambdaErrors)>, Report)> {
    let mut out = Vec::new();
    let mut report = Report::new("lambda-convergence");
    for &m in steps {
        let grid = TimeGrid::uniform(m)?;
        let model = ItoModel::new(build(m), &grid, DriftMethod::ClosedForm)?;
        let batch = PathBatch::simulate(&grid, count, seed)?;
        let e = lambda_errors(&model.simulate(&batch)?)?;
        report.metric_se(format!("mean_rel_error_m{m}"), e.mean_rel, e.mean_rel_se);
        report.metric(format!("mean_rel_error_euler_m{m}"), e.mean_rel_euler);
        out.push((m, e));
    }
    for w in out.windows(2) {
        report.check(Check::le(
            format!("error_ratio_m{}_to_m{}", w[0].0, w[1].0),
            w[1].1.mean_rel / w[0].1.mean_rel,
            max_ratio,
            Provenance::MonteCarlo,
        ));
    }
    Ok((out, report))
}

/// Λ accuracy, `B^T` recovery and Brownianity on one batch.
/// Tolerances left as `None` are reported without a check.
pub fn jacobian_report(model: &ItoModel, batch: &PathBatch, max_tol: Option<f64>, mean_tol: Option<f64>) -> Result<Report> {
    let paths = model.simulate(batch)?;
    let e = lambda_errors(&paths)?;
    let mut report = Report::new("ito-jacobian");
    match mean_tol {
        Some(tol) => report.check(Check::le("lambda_mean_rel_error", e.mean_rel, tol, Provenance::MonteCarlo).with_se(e.mean_rel_se)),
        None => report.metric_se("lambda_mean_rel_error", e.mean_rel, e.mean_rel_se),
    };
    match max_tol {
        Some(tol) => report.check(Check::le("lambda_max_rel_error", e.max_rel, tol, Provenance::Algebraic)),
        None => report.metric("lambda_max_rel_error", e.max_rel),
    };
    report.metric("lambda_mean_rel_error_euler", e.mean_rel_euler);
    if let Some(shift) = translation(&model.f) {
        // B^T = W when f is linear
        let mut worst = 0.0f64;
        for (j, p) in paths.iter().enumerate() {
            for (b, w) in p.b_increments.iter().zip(batch.increments(j)) {
                worst = worst.max((b - w).abs());
            }
        }
        report.metric("translation_norm", shift);
        report.check(Check::le("brownian_part_minus_w", worst, 1e-12, Provenance::Algebraic));
    }
    report.absorb("brownianity", brownianity_report(&paths, model.grid())?);
    Ok(report)
}

/// Nested Monte-Carlo drift against the closed form at `points` prefixes
/// taken from the batch, at 4·SE each.
pub fn nested_drift_check(f: &PathFunctional, batch: &PathBatch, points: usize, method: DriftMethod) -> Result<Report> {
    let grid = batch.grid();
    let m = grid.m();
    let mut worst = f64::NEG_INFINITY;
    let mut min_ess = f64::INFINITY;
    for j in 0..points.min(batch.count()) {
        let i = j % m;
        let prefix = &batch.increments(j)[..i];
        let exact = conditional_drift(f, grid, prefix, i, DriftMethod::ClosedForm, j as u64)?;
        let est = conditional_drift(f, grid, prefix, i, method, j as u64)?;
        worst = worst.max((est.value - exact.value).abs() - 4.0 * est.se);
        min_ess = min_ess.min(est.ess.unwrap_or(f64::INFINITY));
    }
    let mut report = Report::new("nested-drift");
    report.metric("min_effective_sample_size", min_ess);
    report.check(Check::le("max_excess_over_4se", worst, 1e-12, Provenance::MonteCarlo));
    Ok(report)
}

fn translation(f: &PathFunctional) -> Option<f64> {
    match f {
        PathFunctional::Linear { a, hdot } => Some(a.abs() * hdot.iter().map(|h| h * h).sum::<f64>().sqrt()),
        _ => None,
    }
}

/// Rotation properties of `X`, the inverse drift map: `T∘X` preserves `ν`,
/// `X∘T = B^T` pathwise, and `T∘X` is the closest `ν`-preserving map to `X`
/// among `T∘R∘X` for sampled rotations `R` of the increments.
pub fn rotation_check(model: &ItoModel, batch: &PathBatch, rotations: usize) -> Result<Report> {
    let grid = model.grid().clone();
    let m = grid.m();
    let mut report = Report::new("rotation");
    // ν by exact simulation: ν = T(μ)
    let nu_seed = derive_seed(batch.seed(), "nu-samples");
    let ref_seed = derive_seed(batch.seed(), "nu-reference");
    let nu = PathBatch::simulate(&grid, batch.count(), nu_seed)?;
    let reference = PathBatch::simulate(&grid, batch.count(), ref_seed)?;
    let id_base = batch.count() as u64;
    let rows: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..nu.count())
        .into_par_iter()
        .map(|j| -> Result<_> {
            let y = model.transport.map_increments(nu.increments(j));
            let x = model.x_map(&y, id_base + j as u64)?;
            let tx = model.transport.map_increments(&x);
            let r = model.transport.map_increments(reference.increments(j));
            Ok((x, tx, r))
        })
        .collect::<Result<Vec<_>>>()?;
    let times: Vec<usize> = [m / 4, m / 2, (3 * m) / 4, m].iter().map(|&k| k.max(1)).collect();
    let mut worst_ks = 0.0f64;
    for &k in &times {
        let a: Vec<f64> = rows.iter().map(|r| r.1[..k].iter().sum()).collect();
        let b: Vec<f64> = rows.iter().map(|r| r.2[..k].iter().sum()).collect();
        worst_ks = worst_ks.max(ks_two_sample(&a, &b) / ks_critical(a.len(), b.len()));
    }
    report.check(Check::le("marginal_ks_ratio_to_critical", worst_ks, 1.0, Provenance::MonteCarlo));

    // X∘T against B^T on μ paths
    let mut worst = 0.0f64;
    for j in 0..batch.count().min(2000) {
        let p = model.simulate_path(batch.increments(j), j as u64)?;
        let xt = model.x_map(&p.t_increments, j as u64)?;
        for (a, b) in xt.iter().zip(&p.b_increments) {
            worst = worst.max((a - b).abs());
        }
    }
    report.check(Check::le("x_after_t_minus_brownian_part", worst, 1e-12, Provenance::Algebraic));

    // Cameron-Martin cost: Σ (Δ increments)²/Δt
    let cost = |x: &[f64], y: &[f64]| -> f64 {
        x.iter().zip(y).zip(grid.dts()).map(|((a, b), d)| (a - b).powi(2) / d).sum()
    };
    let base: Vec<f64> = rows.iter().map(|r| cost(&r.1, &r.0)).collect();
    let base_est = McEstimate::from_values(&base)?;
    report.metric_se("optimal_cost", base_est.mean, base_est.se);
    let mut min_gap = f64::INFINITY;
    for k in 0..rotations {
        let mut rng = stream(derive_seed(batch.seed(), "rotations"), k as u64);
        let r = random_orthogonal(m, &mut rng);
        let gaps: Vec<f64> = rows
            .par_iter()
            .zip(&base)
            .map(|(row, b)| {
                let z = DVector::from_vec(model.transport.to_standard(&row.0));
                let rz = &r * z;
                let o = model.transport.map_increments(&model.transport.from_standard(rz.as_slice()));
                cost(&o, &row.0) - b
            })
            .collect();
        let est = McEstimate::from_values(&gaps)?;
        min_gap = min_gap.min(est.mean + 4.0 * est.se);
    }
    if rotations > 0 {
        report.check(Check::ge("min_rotation_cost_gap", min_gap, 0.0, Provenance::MonteCarlo).report_only());
    }
    Ok(report)
}

/// `−log c = E[f∘T + ½∫ξ²∘T dt]`, and for H-convex `f` the determinant form
/// `−log c = E[f∘T − log det₂(I+∇²φ) + ½|∇φ|²]` in increment coordinates.
pub fn free_energy_identity(model: &ItoModel, batch: &PathBatch) -> Result<Report> {
    let paths = model.simulate(batch)?;
    let lhs = -model.log_c();
    let rhs = McEstimate::from_values(&paths.iter().map(|p| p.free_energy_sample).collect::<Vec<_>>())?;
    let mut report = Report::new("free-energy");
    report.metric("minus_log_c", lhs);
    report.metric_se("path_form", rhs.mean, rhs.se);
    report.check(Check::le("path_form_gap", (rhs.mean - lhs).abs(), 4.0 * rhs.se + 1e-12, Provenance::MonteCarlo).with_se(rhs.se));
    if model.transport.density.h_convex() {
        if let TransportSolution::Quadratic(q) = &model.transport.solution {
            let ld = log_det2(&HsPerturbation::symmetric(q.n.clone())?)?;
            let vals: Vec<f64> = (0..batch.count())
                .into_par_iter()
                .map(|j| {
                    let dw = batch.increments(j);
                    let z = DVector::from_vec(model.transport.to_standard(dw));
                    let grad = &q.n * &z + &q.b;
                    model.f.value(&model.transport.map_increments(dw)) - ld + 0.5 * grad.norm_squared()
                })
                .collect();
            let est = McEstimate::from_values(&vals)?;
            report.metric("log_det2", ld);
            report.metric_se("det2_form", est.mean, est.se);
            report.check(Check::le("det2_form_gap", (est.mean - lhs).abs(), 4.0 * est.se + 1e-12, Provenance::MonteCarlo).with_se(est.se));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grid_and_batch() {
        let g = TimeGrid::uniform(4).unwrap();
        assert_eq!(g.times(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(TimeGrid::from_times(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        let b = PathBatch::simulate(&g, 20_000, 3).unwrap();
        assert!(b.variance_z_scores().iter().all(|z| z.abs() < 4.0));
        let b2 = PathBatch::simulate(&g, 20_000, 3).unwrap();
        assert_eq!(b.increments(17), b2.increments(17));
        assert_relative_eq!(*b.path(5).last().unwrap(), b.increments(5).iter().sum::<f64>(), epsilon = 1e-15);
    }

    #[test]
    fn translation_case() {
        let g = TimeGrid::uniform(8).unwrap();
        let model = ItoModel::new(PathFunctional::linear_endpoint(1.0, 8), &g, DriftMethod::ClosedForm).unwrap();
        assert_relative_eq!(model.log_c(), 0.5, epsilon = 1e-15);
        let b = PathBatch::simulate(&g, 50, 1).unwrap();
        for j in 0..50 {
            let w = b.increments(j);
            let t = model.transport.path(w);
            let wp = b.path(j);
            for k in 0..8 {
                assert_relative_eq!(t[k], wp[k] - g.times()[k + 1], epsilon = 1e-13);
            }
            let p = model.simulate_path(w, j as u64).unwrap();
            assert!(p.xi_left.iter().all(|x| *x == 1.0));
            let w1: f64 = w.iter().sum();
            assert_relative_eq!(p.log_lambda, w1 - 0.5, epsilon = 1e-13);
            assert_relative_eq!(p.log_lambda_exact, w1 - 0.5, epsilon = 1e-13);
        }
    }

    #[test]
    fn quadratic_drift_closed_form() {
        // f = (s/2)W₁²: ξ_t = s·W_t/(1 + s(1 − t))
        let m = 16;
        let s = 3.0;
        let g = TimeGrid::uniform(m).unwrap();
        let f = PathFunctional::quadratic_endpoint(s, m);
        let prefix: Vec<f64> = (0..5).map(|i| 0.1 * (i as f64 - 1.0)).collect();
        let w: f64 = prefix.iter().sum();
        let t = g.times()[5];
        let d = conditional_drift(&f, &g, &prefix, 5, DriftMethod::ClosedForm, 0).unwrap();
        assert_relative_eq!(d.value, s * w / (1.0 + s * (1.0 - t)), epsilon = 1e-13);
        let mc = conditional_drift(&f, &g, &prefix, 5, DriftMethod::nested(9), 0).unwrap();
        assert!((mc.value - d.value).abs() < 4.0 * mc.se, "{mc:?} vs {d:?}");
        assert!(mc.ess.unwrap() >= DEFAULT_ESS_FLOOR);
        let dt = g.dts();
        let sm = DMatrix::from_element(m, m, s);
        assert_relative_eq!(affine_slope(&sm, &dt, 5).unwrap(), s / (1.0 + s * (1.0 - t)), epsilon = 1e-12);
    }

    #[test]
    fn degenerate_weights_are_loud() {
        let g = TimeGrid::uniform(4).unwrap();
        let f = PathFunctional::linear_endpoint(40.0, 4);
        let r = conditional_drift(&f, &g, &[], 0, DriftMethod::nested(1), 0);
        assert!(matches!(r, Err(OtError::DegenerateWeights { .. })));
    }

    #[test]
    fn zero_functional_is_identity() {
        let g = TimeGrid::uniform(4).unwrap();
        let model = ItoModel::new(PathFunctional::linear_endpoint(0.0, 4), &g, DriftMethod::ClosedForm).unwrap();
        let b = PathBatch::simulate(&g, 10, 2).unwrap();
        let p = model.simulate_path(b.increments(3), 3).unwrap();
        assert_eq!(p.log_lambda, 0.0);
        assert_eq!(p.b_increments, b.increments(3));
    }

    #[test]
    fn quadratic_map_matches_gaussian_target() {
        // κ = (1+s)^{-1/2}: T_t = W_t + (κ − 1)·t·W₁
        let m = 8;
        let g = TimeGrid::uniform(m).unwrap();
        let model = ItoModel::new(PathFunctional::quadratic_endpoint(3.0, m), &g, DriftMethod::ClosedForm).unwrap();
        assert_relative_eq!(model.log_c(), -(2f64.ln()), epsilon = 1e-14);
        let b = PathBatch::simulate(&g, 5, 4).unwrap();
        let w = b.path(2);
        let t = model.transport.path(b.increments(2));
        for k in 0..m {
            assert_relative_eq!(t[k], w[k] - 0.5 * g.times()[k + 1] * w[m - 1], epsilon = 1e-12);
        }
    }

    #[test]
    fn nested_model_runs_on_short_grid() {
        let g = TimeGrid::uniform(4).unwrap();
        let model = ItoModel::new(PathFunctional::quadratic_endpoint(1.0, 4), &g, DriftMethod::nested(5)).unwrap();
        let b = PathBatch::simulate(&g, 4, 4).unwrap();
        let p = model.simulate_path(b.increments(0), 0).unwrap();
        assert!(p.log_lambda.is_finite());
    }
}
