//! Transport maps `T = I + ∇φ` with evaluable potentials.
//!
//! Three representations cover the solvable regimes: an affine map with a
//! quadratic potential, a tabulated monotone map on the line (built by
//! quantile matching against the standard normal), and a coordinatewise
//! product of tabulated maps.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{check_dim, OtError, Result};
use crate::gaussian::{SampleBatch, ScalarFn};
use crate::linalg::{identity, min_eigenvalue, symmetrize};
use crate::quadrature::{gk15, integrate, normal_cdf, normal_sf, LN_SQRT_2PI};
use crate::report::{Check, Provenance, Report};
use crate::rng::stream;

/// Affine map `x ↦ (I+N)x + b`, potential `φ = ½δ²N + ⟨b,x⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticMap {
    pub n: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl QuadraticMap {
    pub fn new(n: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        check_dim(n.nrows(), b.len())?;
        check_dim(n.ncols(), b.len())?;
        Ok(Self { n: symmetrize(&n), b })
    }

    pub fn identity(dim: usize) -> Self {
        Self { n: DMatrix::zeros(dim, dim), b: DVector::zeros(dim) }
    }
}

/// Grid parameters for tabulated one-dimensional maps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    /// Number of tabulated source points.
    pub points: usize,
    /// Source grid covers `[-radius, radius]`.
    pub radius: f64,
    /// Number of cells in the target cumulative table.
    pub target_cells: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        // Φ(−7.1) ≈ 6e-13: tail mass outside the table is below 1e-12.
        Self { points: 4096, radius: 7.1, target_cells: 2048 }
    }
}

/// Log of the target density is `−f(y) − y²/2` up to a constant; the range
/// where it is within this many nats of its peak is tabulated.
const TAIL_NATS: f64 = 80.0;
const SCAN_RADIUS: f64 = 60.0;
const SCAN_STEP: f64 = 0.05;

/// Unnormalized cumulative table of the target `e^{−f(y)}γ(y)`.
#[derive(Debug, Clone)]
struct TargetCdf {
    f: ScalarFn,
    peak: f64,
    edges: Vec<f64>,
    /// `left[k]`: mass of cells `< k`.
    left: Vec<f64>,
    /// `right[k]`: mass of cells `≥ k`.
    right: Vec<f64>,
}

impl TargetCdf {
    fn build(f: ScalarFn, cells: usize) -> Result<Self> {
        let log_dens = |y: f64| -f.value(y) - 0.5 * y * y;
        let steps = (2.0 * SCAN_RADIUS / SCAN_STEP).round() as usize;
        let scan: Vec<(f64, f64)> = (0..=steps)
            .map(|i| {
                let y = -SCAN_RADIUS + i as f64 * SCAN_STEP;
                (y, log_dens(y))
            })
            .collect();
        if let Some(&(y, v)) = scan.iter().find(|(_, v)| v.is_nan() || *v == f64::INFINITY) {
            return Err(OtError::NonIntegrableDensity(format!("log-density {v} at y = {y}")));
        }
        let peak = scan.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let lo = scan.iter().position(|p| p.1 > peak - TAIL_NATS).expect("peak is in scan");
        let hi = scan.iter().rposition(|p| p.1 > peak - TAIL_NATS).expect("peak is in scan");
        if lo == 0 || hi == steps {
            return Err(OtError::NonIntegrableDensity(format!(
                "target density does not decay within |y| ≤ {SCAN_RADIUS}"
            )));
        }
        let a = scan[lo - 1].0;
        let b = scan[hi + 1].0;
        let edges: Vec<f64> = (0..=cells).map(|k| a + (b - a) * k as f64 / cells as f64).collect();
        let g = |y: f64| (log_dens(y) - peak).exp();
        let mut masses = Vec::with_capacity(cells);
        for k in 0..cells {
            let m = integrate(g, edges[k], edges[k + 1], 1e-300, 1e-15)?.value;
            masses.push(m);
        }
        let mut left = vec![0.0; cells + 1];
        for k in 0..cells {
            left[k + 1] = left[k] + masses[k];
        }
        let mut right = vec![0.0; cells + 1];
        for k in (0..cells).rev() {
            right[k] = right[k + 1] + masses[k];
        }
        Ok(Self { f, peak, edges, left, right })
    }

    fn total(&self) -> f64 {
        self.right[0]
    }

    fn g(&self, y: f64) -> f64 {
        (-self.f.value(y) - 0.5 * y * y - self.peak).exp()
    }

    fn log_c(&self) -> f64 {
        self.peak + self.total().ln() - LN_SQRT_2PI
    }

    fn partial(&self, a: f64, b: f64) -> f64 {
        gk15(&|y| self.g(y), a, b).0
    }

    /// Unnormalized mass below `y`.
    fn lower_mass(&self, y: f64) -> f64 {
        let cells = self.edges.len() - 1;
        if y <= self.edges[0] {
            return 0.0;
        }
        if y >= self.edges[cells] {
            return self.total();
        }
        let k = self.cell_of(y);
        self.left[k] + self.partial(self.edges[k], y)
    }

    fn upper_mass(&self, y: f64) -> f64 {
        let cells = self.edges.len() - 1;
        if y <= self.edges[0] {
            return self.total();
        }
        if y >= self.edges[cells] {
            return 0.0;
        }
        let k = self.cell_of(y);
        self.right[k + 1] + self.partial(y, self.edges[k + 1])
    }

    fn cell_of(&self, y: f64) -> usize {
        let cells = self.edges.len() - 1;
        let a = self.edges[0];
        let w = (self.edges[cells] - a) / cells as f64;
        (((y - a) / w).floor() as usize).min(cells - 1)
    }

    /// Normalized lower and upper tail probabilities at `y`.
    fn tails(&self, y: f64) -> (f64, f64) {
        (self.lower_mass(y) / self.total(), self.upper_mass(y) / self.total())
    }

    /// Solves `mass(y) = target` inside cell `k`; `from_left` selects the
    /// lower cumulative (`∫_{e_k}^{y}`) or the upper one (`∫_{y}^{e_{k+1}}`).
    fn solve_in_cell(&self, k: usize, target: f64, from_left: bool) -> f64 {
        let (a, b) = (self.edges[k], self.edges[k + 1]);
        let cell_mass = self.left[k + 1] - self.left[k];
        let frac = if cell_mass > 0.0 { (target / cell_mass).clamp(0.0, 1.0) } else { 0.5 };
        let mut y = if from_left { a + frac * (b - a) } else { b - frac * (b - a) };
        let (mut lo, mut hi) = (a, b);
        for _ in 0..60 {
            let (resid, slope) = if from_left {
                (self.partial(a, y) - target, self.g(y))
            } else {
                (self.partial(y, b) - target, -self.g(y))
            };
            // bracket maintenance: resid is increasing in y for from_left
            let increasing_resid_positive = if from_left { resid > 0.0 } else { resid < 0.0 };
            if increasing_resid_positive {
                hi = y;
            } else {
                lo = y;
            }
            let mut next = if slope != 0.0 { y - resid / slope } else { 0.5 * (lo + hi) };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - y).abs() <= 1e-15 * (1.0 + y.abs()) {
                return next;
            }
            y = next;
        }
        y
    }

    /// Target quantile matching the standard normal at `x`: `F(T(x)) = Φ(x)`.
    fn quantile_of_normal(&self, x: f64) -> f64 {
        let cells = self.edges.len() - 1;
        let total = self.total();
        if x <= 0.0 {
            let u = normal_cdf(x) * total;
            if u <= 0.0 {
                return self.edges[0];
            }
            let k = match self.left.partition_point(|&m| m <= u) {
                0 => 0,
                p => (p - 1).min(cells - 1),
            };
            self.solve_in_cell(k, u - self.left[k], true)
        } else {
            let v = normal_sf(x) * total;
            if v <= 0.0 {
                return self.edges[cells];
            }
            // right is decreasing; find k with right[k+1] ≤ v < right[k]
            let p = self.right.partition_point(|&m| m > v);
            let k = p.saturating_sub(1).min(cells - 1);
            self.solve_in_cell(k, v - self.right[k + 1], false)
        }
    }
}

/// `ln E[e^{−f(Z)}]`, `Z ~ N(0,1)`, from the cumulative table of the target.
pub fn log_normalizer_1d(f: &ScalarFn) -> Result<f64> {
    Ok(TargetCdf::build(f.clone(), 512)?.log_c())
}

/// Monotone map `T = F_ν^{−1}∘Φ` on the line, tabulated with cubic Hermite
/// interpolation. `T′` is evaluated from the change-of-variables identity
/// `T′(x) = γ(x) / p_ν(T(x))`, not by differencing the table.
#[derive(Debug, Clone)]
pub struct Monotone1D {
    cdf: TargetCdf,
    log_c: f64,
    grid: GridSpec,
    x0: f64,
    h: f64,
    ts: Vec<f64>,
    /// Hermite slopes (exact derivatives, limited where needed for monotonicity).
    slopes: Vec<f64>,
    /// `φ` at the nodes, anchored to `φ(0) = 0`.
    phis: Vec<f64>,
}

impl Monotone1D {
    /// Builds the table for the target `e^{−f}γ / c`.
    pub fn build(f: ScalarFn, grid: GridSpec) -> Result<Self> {
        if grid.points < 4 || grid.target_cells < 4 || grid.radius <= 0.0 {
            return Err(OtError::InvalidArgument("grid too small".into()));
        }
        let cdf = TargetCdf::build(f, grid.target_cells)?;
        let log_c = cdf.log_c();
        let x0 = -grid.radius;
        let h = 2.0 * grid.radius / (grid.points - 1) as f64;
        let ts: Vec<f64> = (0..grid.points).map(|i| cdf.quantile_of_normal(x0 + i as f64 * h)).collect();
        if let Some(i) = ts.windows(2).position(|w| w[1] <= w[0]) {
            return Err(OtError::QuadratureFailure(format!(
                "tabulated map not increasing at x = {}",
                x0 + i as f64 * h
            )));
        }
        let mut map = Self { cdf, log_c, grid, x0, h, ts, slopes: Vec::new(), phis: Vec::new() };
        let mut slopes: Vec<f64> = (0..grid.points)
            .map(|i| map.derivative_at(map.node(i), map.ts[i]))
            .collect();
        // Fritsch-Carlson limiter
        for i in 0..grid.points - 1 {
            let delta = (map.ts[i + 1] - map.ts[i]) / h;
            let (a, b) = (slopes[i] / delta, slopes[i + 1] / delta);
            let r = a * a + b * b;
            if r > 9.0 {
                let tau = 3.0 / r.sqrt();
                slopes[i] = tau * a * delta;
                slopes[i + 1] = tau * b * delta;
            }
        }
        map.slopes = slopes;
        let mut phis = vec![0.0; grid.points];
        for i in 0..grid.points - 1 {
            phis[i + 1] = phis[i] + map.cell_integral(i, 1.0);
        }
        map.phis = phis;
        let anchor = map.phi(0.0);
        map.phis.iter_mut().for_each(|p| *p -= anchor);
        Ok(map)
    }

    fn node(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }

    fn x_end(&self) -> f64 {
        self.node(self.grid.points - 1)
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// `ln c`, `c = E_μ[e^{−f}]`.
    pub fn log_c(&self) -> f64 {
        self.log_c
    }

    pub fn target(&self) -> &ScalarFn {
        &self.cdf.f
    }

    /// Tabulated source nodes and map values.
    pub fn table(&self) -> (Vec<f64>, &[f64]) {
        ((0..self.grid.points).map(|i| self.node(i)).collect(), &self.ts)
    }

    fn derivative_at(&self, x: f64, t: f64) -> f64 {
        (self.log_c + self.cdf.f.value(t) + 0.5 * (t * t - x * x)).exp()
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let j = (((x - self.x0) / self.h).floor() as usize).min(self.grid.points - 2);
        (j, (x - self.node(j)) / self.h)
    }

    /// `∫_{x_j}^{x_j + τh} (T(s) − s) ds` over the Hermite cell.
    fn cell_integral(&self, j: usize, tau: f64) -> f64 {
        let (y0, y1) = (self.ts[j], self.ts[j + 1]);
        let (d0, d1) = (self.slopes[j], self.slopes[j + 1]);
        let h = self.h;
        let t2 = tau * tau;
        let t3 = t2 * tau;
        let t4 = t3 * tau;
        let h00 = t4 / 2.0 - t3 + tau;
        let h10 = t4 / 4.0 - 2.0 * t3 / 3.0 + t2 / 2.0;
        let h01 = -t4 / 2.0 + t3;
        let h11 = t4 / 4.0 - t3 / 3.0;
        let map_part = h * (h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1);
        let xa = self.node(j);
        let xb = xa + tau * h;
        map_part - 0.5 * (xb * xb - xa * xa)
    }

    /// Direct evaluation by CDF inversion (used outside the table).
    pub fn map_direct(&self, x: f64) -> f64 {
        self.cdf.quantile_of_normal(x)
    }

    pub fn map(&self, x: f64) -> f64 {
        if x < self.x0 || x > self.x_end() {
            return self.map_direct(x);
        }
        let (j, t) = self.locate(x);
        let (y0, y1) = (self.ts[j], self.ts[j + 1]);
        let (d0, d1) = (self.slopes[j], self.slopes[j + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * self.h * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * self.h * d1
    }

    /// `T′(x)` from the density ratio at the interpolated `T(x)`.
    pub fn derivative(&self, x: f64) -> f64 {
        self.derivative_at(x, self.map(x))
    }

    pub fn grad_phi(&self, x: f64) -> f64 {
        self.map(x) - x
    }

    pub fn hess_phi(&self, x: f64) -> f64 {
        self.derivative(x) - 1.0
    }

    pub fn phi(&self, x: f64) -> f64 {
        if x < self.x0 {
            let tail = integrate(|s| self.map(s) - s, x, self.x0, 1e-13, 1e-13).map_or(f64::NAN, |i| i.value);
            return self.phis[0] - tail;
        }
        if x > self.x_end() {
            let n = self.grid.points - 1;
            let tail = integrate(|s| self.map(s) - s, self.x_end(), x, 1e-13, 1e-13).map_or(f64::NAN, |i| i.value);
            return self.phis[n] + tail;
        }
        let (j, t) = self.locate(x);
        self.phis[j] + self.cell_integral(j, t)
    }

    /// `ℒφ(x) = x·φ′(x) − φ″(x)`.
    pub fn ou_phi(&self, x: f64) -> f64 {
        let t = self.map(x);
        x * (t - x) - (self.derivative_at(x, t) - 1.0)
    }

    pub fn inverse(&self, y: f64) -> Result<f64> {
        let n = self.grid.points;
        let (lo, hi) = if y >= self.ts[0] && y <= self.ts[n - 1] {
            let p = self.ts.partition_point(|&t| t <= y).clamp(1, n - 1);
            (self.node(p - 1), self.node(p))
        } else {
            // expand a bracket outside the table
            let (mut lo, mut hi) = if y < self.ts[0] { (self.x0 - 1.0, self.x0) } else { (self.x_end(), self.x_end() + 1.0) };
            let mut guard = 0;
            while self.map(lo) > y || self.map(hi) < y {
                if self.map(lo) > y {
                    lo -= 2.0 * (hi - lo);
                } else {
                    hi += 2.0 * (hi - lo);
                }
                guard += 1;
                if guard > 60 || lo < -40.0 || hi > 40.0 {
                    return Err(OtError::InvalidArgument(format!("{y} outside the range of the map")));
                }
            }
            (lo, hi)
        };
        Ok(solve_monotone(|x| self.map(x), |x| self.derivative(x), y, lo, hi))
    }

    /// Normalized target CDF and survival function at `y`.
    pub fn target_tails(&self, y: f64) -> (f64, f64) {
        self.cdf.tails(y)
    }

    /// Target density `e^{−f(y)}γ(y)/c`.
    pub fn target_density(&self, y: f64) -> f64 {
        (-self.cdf.f.value(y) - 0.5 * y * y - LN_SQRT_2PI - self.log_c).exp()
    }
}

/// Newton with bisection safeguard for an increasing `g` on `[lo, hi]`.
fn solve_monotone(g: impl Fn(f64) -> f64, dg: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut x = 0.5 * (lo + hi);
    for _ in 0..100 {
        let r = g(x) - target;
        if r > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = dg(x);
        let mut next = if d > 0.0 { x - r / d } else { 0.5 * (lo + hi) };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * (1.0 + x.abs()) {
            return next;
        }
        x = next;
    }
    x
}

/// A transport map `T = I + ∇φ` pushing the standard Gaussian forward.
#[derive(Debug, Clone)]
pub enum TransportSolution {
    Quadratic(QuadraticMap),
    Monotone1D(Box<Monotone1D>),
    /// Independent tabulated maps per coordinate.
    Composite(Vec<Monotone1D>),
}

impl TransportSolution {
    pub fn identity(dim: usize) -> Self {
        TransportSolution::Quadratic(QuadraticMap::identity(dim))
    }

    pub fn dim(&self) -> usize {
        match self {
            TransportSolution::Quadratic(q) => q.b.len(),
            TransportSolution::Monotone1D(_) => 1,
            TransportSolution::Composite(c) => c.len(),
        }
    }

    pub fn is_tabulated(&self) -> bool {
        !matches!(self, TransportSolution::Quadratic(_))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            TransportSolution::Quadratic(_) => "quadratic-potential",
            TransportSolution::Monotone1D(_) => "monotone-1d",
            TransportSolution::Composite(_) => "composite",
        }
    }

    /// Per-coordinate tabulated maps, when the solution is coordinatewise.
    pub fn coordinate_maps(&self) -> Option<Vec<&Monotone1D>> {
        match self {
            TransportSolution::Quadratic(_) => None,
            TransportSolution::Monotone1D(m) => Some(vec![m.as_ref()]),
            TransportSolution::Composite(c) => Some(c.iter().collect()),
        }
    }

    pub fn map(&self, x: &[f64]) -> DVector<f64> {
        match self {
            TransportSolution::Quadratic(q) => {
                let v = DVector::from_column_slice(x);
                &v + &q.n * &v + &q.b
            }
            TransportSolution::Monotone1D(m) => DVector::from_element(1, m.map(x[0])),
            TransportSolution::Composite(c) => DVector::from_iterator(x.len(), c.iter().zip(x).map(|(m, &xi)| m.map(xi))),
        }
    }

    pub fn grad_phi(&self, x: &[f64]) -> DVector<f64> {
        match self {
            TransportSolution::Quadratic(q) => &q.n * DVector::from_column_slice(x) + &q.b,
            _ => self.map(x) - DVector::from_column_slice(x),
        }
    }

    pub fn hess_phi(&self, x: &[f64]) -> DMatrix<f64> {
        match self {
            TransportSolution::Quadratic(q) => q.n.clone(),
            TransportSolution::Monotone1D(m) => DMatrix::from_element(1, 1, m.hess_phi(x[0])),
            TransportSolution::Composite(c) => {
                DMatrix::from_diagonal(&DVector::from_iterator(x.len(), c.iter().zip(x).map(|(m, &xi)| m.hess_phi(xi))))
            }
        }
    }

    pub fn phi(&self, x: &[f64]) -> f64 {
        match self {
            TransportSolution::Quadratic(q) => {
                let v = DVector::from_column_slice(x);
                0.5 * (v.dot(&(&q.n * &v)) - q.n.trace()) + q.b.dot(&v)
            }
            TransportSolution::Monotone1D(m) => m.phi(x[0]),
            TransportSolution::Composite(c) => c.iter().zip(x).map(|(m, &xi)| m.phi(xi)).sum(),
        }
    }

    /// `ℒφ(x) = ⟨x, ∇φ(x)⟩ − tr ∇²φ(x)`.
    pub fn ou_phi(&self, x: &[f64]) -> f64 {
        match self {
            TransportSolution::Quadratic(q) => {
                let v = DVector::from_column_slice(x);
                v.dot(&(&q.n * &v + &q.b)) - q.n.trace()
            }
            TransportSolution::Monotone1D(m) => m.ou_phi(x[0]),
            TransportSolution::Composite(c) => c.iter().zip(x).map(|(m, &xi)| m.ou_phi(xi)).sum(),
        }
    }

    pub fn inverse(&self, y: &[f64]) -> Result<DVector<f64>> {
        check_dim(self.dim(), y.len())?;
        match self {
            TransportSolution::Quadratic(q) => {
                let a = identity(q.b.len()) + &q.n;
                a.lu()
                    .solve(&(DVector::from_column_slice(y) - &q.b))
                    .ok_or_else(|| OtError::SingularPerturbation("I + N is singular".into()))
            }
            TransportSolution::Monotone1D(m) => Ok(DVector::from_element(1, m.inverse(y[0])?)),
            TransportSolution::Composite(c) => {
                let mut out = DVector::zeros(y.len());
                for (i, (m, &yi)) in c.iter().zip(y).enumerate() {
                    out[i] = m.inverse(yi)?;
                }
                Ok(out)
            }
        }
    }

    /// Structural invariants on probe points: pairwise monotonicity,
    /// 1-convexity of `φ`, and `T^{−1}∘T = id`.
    pub fn validate(&self, batch: &SampleBatch, tol: f64) -> Result<Report> {
        check_dim(self.dim(), batch.dim())?;
        let mut report = Report::new("transport-invariants");
        let n = batch.count();
        let mut worst_mono = f64::INFINITY;
        for i in 0..n.saturating_sub(1) {
            let (x, y) = (batch.point(i), batch.point(i + 1));
            let d = DVector::from_column_slice(x) - DVector::from_column_slice(y);
            let inner = (self.map(x) - self.map(y)).dot(&d) / d.norm_squared().max(f64::MIN_POSITIVE);
            worst_mono = worst_mono.min(inner);
        }
        report.check(Check::ge("monotone_pairs_min_ratio", worst_mono, -tol, Provenance::Algebraic));
        let min_eig = batch
            .par_map(|x| min_eigenvalue(&self.hess_phi(x)))
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        report.check(Check::ge("hess_phi_min_eigenvalue", min_eig, -(1.0 + tol), Provenance::Algebraic));
        let roundtrip = batch
            .par_map(|x| self.inverse(self.map(x).as_slice()).map(|z| (z - DVector::from_column_slice(x)).amax()))
            .into_iter()
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let rt_tol = if self.is_tabulated() { 1e-8 } else { 1e-10 };
        report.check(Check::le("inverse_roundtrip_max", roundtrip, rt_tol, Provenance::Algebraic));
        Ok(report)
    }
}

/// `Σᵢ ⟨T(uᵢ), u_{i+1} − uᵢ⟩` over random closed cycles; every sum must be `≤ tol`.
pub fn cyclic_monotonicity(
    map: &(dyn Fn(&[f64]) -> DVector<f64> + Sync),
    dim: usize,
    cycles: usize,
    length: usize,
    seed: u64,
    tol: f64,
) -> Report {
    let mut report = Report::new("cyclic-monotonicity");
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0usize;
    for c in 0..cycles {
        let mut rng = stream(seed, c as u64);
        let pts: Vec<DVector<f64>> = (0..length).map(|_| crate::linalg::gaussian_vector(dim, &mut rng)).collect();
        let sum: f64 = (0..length)
            .map(|i| {
                let next = &pts[(i + 1) % length];
                map(pts[i].as_slice()).dot(&(next - &pts[i]))
            })
            .sum();
        if sum > tol {
            violations += 1;
        }
        worst = worst.max(sum);
    }
    report.metric("cycles", cycles as f64).metric("cycle_length", length as f64).metric("violations", violations as f64);
    report.check(Check::le("max_cycle_sum", worst, tol, Provenance::Algebraic));
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::GaussianSpace;
    use approx::assert_relative_eq;

    #[test]
    fn zero_target_gives_identity() {
        let m = Monotone1D::build(ScalarFn::zero(), GridSpec::default()).unwrap();
        for &x in &[-6.5, -2.0, 0.0, 0.3, 4.0] {
            assert!((m.map(x) - x).abs() < 1e-9, "{x}");
        }
        assert!(m.log_c().abs() < 1e-12);
    }

    #[test]
    fn quadratic_target_gives_half_map() {
        let m = Monotone1D::build(ScalarFn::half_square(3.0), GridSpec::default()).unwrap();
        let (xs, ts) = m.table();
        let err = xs.iter().zip(ts).map(|(x, t)| (t - x / 2.0).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "max table error {err}");
        assert_relative_eq!(m.log_c(), 0.5f64.ln(), epsilon = 1e-12);
        // off-grid interpolation and outside the table
        for &x in &[-0.123_456, 1.000_1, 7.5, -9.0] {
            assert!((m.map(x) - x / 2.0).abs() < 1e-8, "{x}");
            assert_relative_eq!(m.derivative(x), 0.5, epsilon = 1e-8);
        }
        // φ = −x²/4 anchored at 0
        assert!((m.phi(2.0) + 1.0).abs() < 1e-8);
        assert!((m.inverse(0.75).unwrap() - 1.5).abs() < 1e-8);
    }

    #[test]
    fn non_integrable_target_is_rejected() {
        let err = Monotone1D::build(ScalarFn::half_square(-2.0), GridSpec::default()).unwrap_err();
        assert!(matches!(err, OtError::NonIntegrableDensity(_)));
    }

    #[test]
    fn identity_cycles_are_non_positive() {
        let r = cyclic_monotonicity(&|x: &[f64]| DVector::from_column_slice(x), 3, 200, 5, 1, 1e-12);
        assert!(r.passed());
        let r = cyclic_monotonicity(&|x: &[f64]| -DVector::from_column_slice(x), 1, 200, 2, 1, 1e-12);
        assert!(!r.passed());
    }

    #[test]
    fn quadratic_solution_invariants() {
        let q = QuadraticMap::new(DMatrix::from_row_slice(2, 2, &[-0.4, 0.1, 0.1, 0.3]), DVector::from_vec(vec![0.5, -1.0])).unwrap();
        let t = TransportSolution::Quadratic(q);
        let batch = GaussianSpace::new(2).unwrap().sample(100, 3).unwrap();
        assert!(t.validate(&batch, 1e-12).unwrap().passed());
    }
}
