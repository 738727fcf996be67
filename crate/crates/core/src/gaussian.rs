//! Finite-dimensional Gaussian calculus: standard normal sections, Wiener
//! functionals with derivative access, divergence and Ornstein-Uhlenbeck
//! operators, Monte-Carlo expectations.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, OtError, Result};
use crate::linalg::{min_eigenvalue, symmetrize};
use crate::rng::fill_normals;

/// The standard Gaussian measure on an `dim`-dimensional regular section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GaussianSpace {
    dim: usize,
}

impl GaussianSpace {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(OtError::InvalidArgument("dimension must be at least 1".into()));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// I.i.d. standard normal rows; row `i` is drawn from stream `(seed, i)`.
    pub fn sample(&self, count: usize, seed: u64) -> Result<SampleBatch> {
        if count == 0 {
            return Err(OtError::InvalidArgument("sample count must be at least 1".into()));
        }
        let mut points = vec![0.0; count * self.dim];
        points
            .par_chunks_mut(self.dim)
            .enumerate()
            .for_each(|(i, row)| fill_normals(seed, i as u64, row));
        Ok(SampleBatch { points, dim: self.dim, count, seed })
    }
}

/// Immutable batch of standard normal draws, row-major `count × dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    points: Vec<f64>,
    dim: usize,
    count: usize,
    seed: u64,
}

impl SampleBatch {
    /// Wraps externally supplied points (row-major).
    pub fn from_points(points: Vec<f64>, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 || points.is_empty() || points.len() % dim != 0 {
            return Err(OtError::InvalidArgument("points length must be a positive multiple of dim".into()));
        }
        let count = points.len() / dim;
        Ok(Self { points, dim, count, seed })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn count(&self) -> usize {
        self.count
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vector(&self, i: usize) -> DVector<f64> {
        DVector::from_column_slice(self.point(i))
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks(self.dim)
    }

    /// Order-preserving parallel map over the rows.
    pub fn par_map<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&[f64]) -> T + Sync + Send,
    {
        self.points.par_chunks(self.dim).map(f).collect()
    }

    /// Keeps the first `count` rows.
    pub fn truncated(&self, count: usize) -> SampleBatch {
        let count = count.min(self.count).max(1);
        SampleBatch {
            points: self.points[..count * self.dim].to_vec(),
            dim: self.dim,
            count,
            seed: self.seed,
        }
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

impl McEstimate {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(OtError::NonFinite { index, value });
        }
        let n = values.len();
        if n == 0 {
            return Err(OtError::InvalidArgument("empty sample".into()));
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Ok(Self { mean, se, count: n })
    }

    /// `|mean − target| ≤ k·SE`, with an absolute floor for zero-variance estimates.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.se + 1e-12 * (1.0 + target.abs())
    }
}

pub fn mc_expect<G>(g: G, batch: &SampleBatch) -> Result<McEstimate>
where
    G: Fn(&[f64]) -> f64 + Sync + Send,
{
    McEstimate::from_values(&batch.par_map(g))
}

pub type ScalarEval = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type PointEval = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradientEval = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;
pub type HessianEval = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// A scalar function of one coordinate with two derivatives.
#[derive(Clone)]
pub enum ScalarFn {
    /// Polynomial with coefficients in increasing degree.
    Poly(Vec<f64>),
    Custom {
        label: String,
        f: ScalarEval,
        df: ScalarEval,
        d2f: ScalarEval,
        convexity_lower_bound: Option<f64>,
    },
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarFn::Poly(c) => f.debug_tuple("Poly").field(c).finish(),
            ScalarFn::Custom { label, .. } => f.debug_struct("Custom").field("label", label).finish(),
        }
    }
}

fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn poly_derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(k, &a)| k as f64 * a).collect()
}

fn poly_degree(c: &[f64]) -> Option<usize> {
    c.iter().rposition(|&a| a != 0.0)
}

impl ScalarFn {
    pub fn zero() -> Self {
        ScalarFn::Poly(vec![])
    }

    /// `a·x²/2`
    pub fn half_square(a: f64) -> Self {
        ScalarFn::Poly(vec![0.0, 0.0, 0.5 * a])
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            ScalarFn::Poly(c) => poly_eval(c, x),
            ScalarFn::Custom { f, .. } => f(x),
        }
    }

    pub fn d1(&self, x: f64) -> f64 {
        match self {
            ScalarFn::Poly(c) => poly_eval(&poly_derivative(c), x),
            ScalarFn::Custom { df, .. } => df(x),
        }
    }

    pub fn d2(&self, x: f64) -> f64 {
        match self {
            ScalarFn::Poly(c) => poly_eval(&poly_derivative(&poly_derivative(c)), x),
            ScalarFn::Custom { d2f, .. } => d2f(x),
        }
    }

    /// True when the function is constant.
    pub fn is_constant(&self) -> bool {
        match self {
            ScalarFn::Poly(c) => poly_degree(c).is_none_or(|d| d == 0),
            ScalarFn::Custom { .. } => false,
        }
    }

    /// Infimum of the second derivative where it can be determined.
    pub fn convexity_lower_bound(&self) -> Option<f64> {
        match self {
            ScalarFn::Poly(c) => {
                let d2 = poly_derivative(&poly_derivative(c));
                match poly_degree(&d2) {
                    None => Some(0.0),
                    Some(0) => Some(d2[0]),
                    Some(1) => Some(f64::NEG_INFINITY),
                    Some(2) if d2[2] > 0.0 => Some(d2[0] - d2[1] * d2[1] / (4.0 * d2[2])),
                    Some(2) => Some(f64::NEG_INFINITY),
                    _ => None,
                }
            }
            ScalarFn::Custom { convexity_lower_bound, .. } => *convexity_lower_bound,
        }
    }

    /// `x ↦ self(scale·x)`.
    pub fn rescaled(&self, scale: f64) -> ScalarFn {
        match self {
            ScalarFn::Poly(c) => ScalarFn::Poly(c.iter().enumerate().map(|(k, a)| a * scale.powi(k as i32)).collect()),
            ScalarFn::Custom { label, f, df, d2f, convexity_lower_bound } => {
                let (f, df, d2f) = (f.clone(), df.clone(), d2f.clone());
                ScalarFn::Custom {
                    label: format!("{label}∘({scale}·x)"),
                    f: Arc::new(move |x| f(scale * x)),
                    df: Arc::new(move |x| scale * df(scale * x)),
                    d2f: Arc::new(move |x| scale * scale * d2f(scale * x)),
                    convexity_lower_bound: convexity_lower_bound.map(|b| b * scale * scale),
                }
            }
        }
    }
}

/// User-supplied functional with optional exact derivatives.
#[derive(Clone)]
pub struct CustomFunctional {
    pub dim: usize,
    pub f: PointEval,
    pub gradient: Option<GradientEval>,
    pub hessian: Option<HessianEval>,
    /// Permit the central-difference fallback for missing derivatives.
    pub allow_fd_fallback: bool,
    pub convexity_lower_bound: Option<f64>,
    pub depends_on_first: usize,
}

impl fmt::Debug for CustomFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomFunctional")
            .field("dim", &self.dim)
            .field("gradient", &self.gradient.is_some())
            .field("hessian", &self.hessian.is_some())
            .field("allow_fd_fallback", &self.allow_fd_fallback)
            .finish()
    }
}

/// A Wiener functional restricted to a finite-dimensional section.
#[derive(Debug, Clone)]
pub enum Functional {
    Constant(f64),
    Linear(DVector<f64>),
    /// `½⟨Sx,x⟩ + ⟨h,x⟩ + c`
    Quadratic { s: DMatrix<f64>, h: DVector<f64>, c: f64 },
    /// `Σᵢ gᵢ(xᵢ) + offset`
    Separable { terms: Vec<ScalarFn>, offset: f64 },
    Custom(CustomFunctional),
}

fn fd_step(x: f64) -> f64 {
    1e-5 * (1.0 + x.abs())
}

impl Functional {
    pub fn zero() -> Self {
        Functional::Constant(0.0)
    }

    /// Quadratic functional; `s` is symmetrized.
    pub fn quadratic(s: DMatrix<f64>, h: DVector<f64>, c: f64) -> Result<Self> {
        if s.nrows() != s.ncols() {
            return Err(OtError::InvalidArgument("quadratic form must be square".into()));
        }
        check_dim(s.nrows(), h.len())?;
        Ok(Functional::Quadratic { s: symmetrize(&s), h, c })
    }

    pub fn separable(terms: Vec<ScalarFn>) -> Self {
        Functional::Separable { terms, offset: 0.0 }
    }

    /// `None` for constants, which live on every section.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Functional::Constant(_) => None,
            Functional::Linear(h) => Some(h.len()),
            Functional::Quadratic { h, .. } => Some(h.len()),
            Functional::Separable { terms, .. } => Some(terms.len()),
            Functional::Custom(c) => Some(c.dim),
        }
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        match self.dim() {
            Some(d) => check_dim(d, x.len()),
            None => Ok(()),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Functional::Constant(c) => *c,
            Functional::Linear(h) => h.iter().zip(x).map(|(a, b)| a * b).sum(),
            Functional::Quadratic { s, h, c } => {
                let v = DVector::from_column_slice(x);
                0.5 * v.dot(&(s * &v)) + h.dot(&v) + c
            }
            Functional::Separable { terms, offset } => {
                terms.iter().zip(x).map(|(t, &xi)| t.value(xi)).sum::<f64>() + offset
            }
            Functional::Custom(c) => (c.f)(x),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        match self {
            Functional::Constant(_) => DVector::zeros(x.len()),
            Functional::Linear(h) => h.clone(),
            Functional::Quadratic { s, h, .. } => s * DVector::from_column_slice(x) + h,
            Functional::Separable { terms, .. } => {
                DVector::from_iterator(x.len(), terms.iter().zip(x).map(|(t, &xi)| t.d1(xi)))
            }
            Functional::Custom(c) => match &c.gradient {
                Some(g) => g(x),
                None => fd_gradient(&*c.f, x),
            },
        }
    }

    pub fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        match self {
            Functional::Constant(_) | Functional::Linear(_) => Ok(DMatrix::zeros(x.len(), x.len())),
            Functional::Quadratic { s, .. } => Ok(s.clone()),
            Functional::Separable { terms, .. } => Ok(DMatrix::from_diagonal(&DVector::from_iterator(
                x.len(),
                terms.iter().zip(x).map(|(t, &xi)| t.d2(xi)),
            ))),
            Functional::Custom(c) => match (&c.hessian, &c.gradient) {
                (Some(h), _) => Ok(h(x)),
                (None, _) if !c.allow_fd_fallback => Err(OtError::HessianUnavailable),
                (None, Some(g)) => Ok(fd_jacobian(&**g, x)),
                (None, None) => Ok(fd_hessian(&*c.f, x)),
            },
        }
    }

    /// True when some derivative comes from the finite-difference fallback.
    pub fn uses_finite_differences(&self) -> bool {
        matches!(self, Functional::Custom(c) if c.gradient.is_none() || c.hessian.is_none())
    }

    /// Largest λ with `∇²f ⪰ λ·I` where it is known.
    pub fn convexity_lower_bound(&self) -> Option<f64> {
        match self {
            Functional::Constant(_) | Functional::Linear(_) => Some(0.0),
            Functional::Quadratic { s, .. } => Some(min_eigenvalue(s)),
            Functional::Separable { terms, .. } => terms
                .iter()
                .map(ScalarFn::convexity_lower_bound)
                .try_fold(f64::INFINITY, |acc, b| b.map(|b| acc.min(b))),
            Functional::Custom(c) => c.convexity_lower_bound,
        }
    }

    /// Smallest `d` such that `f` depends only on the first `d` coordinates.
    pub fn depends_on_first(&self) -> usize {
        match self {
            Functional::Constant(_) => 0,
            Functional::Linear(h) => h.iter().rposition(|&v| v != 0.0).map_or(0, |i| i + 1),
            Functional::Quadratic { s, h, .. } => {
                let n = h.len();
                (0..n)
                    .rev()
                    .find(|&i| h[i] != 0.0 || (0..n).any(|j| s[(i, j)] != 0.0))
                    .map_or(0, |i| i + 1)
            }
            Functional::Separable { terms, .. } => {
                terms.iter().rposition(|t| !t.is_constant()).map_or(0, |i| i + 1)
            }
            Functional::Custom(c) => c.depends_on_first,
        }
    }

    /// Largest relative deviation between the gradient evaluator and central
    /// differences of `f` over the batch.
    pub fn audit_gradient(&self, batch: &SampleBatch) -> f64 {
        batch
            .par_map(|x| {
                let g = self.gradient(x);
                let fd = fd_gradient(&|y: &[f64]| self.value(y), x);
                (&g - &fd).amax() / g.amax().max(1.0)
            })
            .into_iter()
            .fold(0.0, f64::max)
    }
}

fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> DVector<f64> {
    let mut y = x.to_vec();
    DVector::from_fn(x.len(), |i, _| {
        let h = fd_step(x[i]);
        y[i] = x[i] + h;
        let up = f(&y);
        y[i] = x[i] - h;
        let down = f(&y);
        y[i] = x[i];
        (up - down) / (2.0 * h)
    })
}

fn fd_jacobian(g: &dyn Fn(&[f64]) -> DVector<f64>, x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let mut y = x.to_vec();
    let mut jac = DMatrix::zeros(n, n);
    for j in 0..n {
        let h = fd_step(x[j]);
        y[j] = x[j] + h;
        let up = g(&y);
        y[j] = x[j] - h;
        let down = g(&y);
        y[j] = x[j];
        jac.set_column(j, &((up - down) / (2.0 * h)));
    }
    symmetrize(&jac)
}

fn fd_hessian(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> DMatrix<f64> {
    fd_jacobian(&|y: &[f64]| fd_gradient(f, y), x)
}

/// Vector-valued divergence of the linear field `K`: in finite dimension `δK(x) = Kx`.
pub fn divergence_linear(k: &DMatrix<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(k.ncols(), x.len())?;
    check_dim(k.nrows(), x.len())?;
    Ok(k * x)
}

/// Second Wiener chaos `δ²K(x) = ⟨Kx,x⟩ − tr K`.
pub fn second_chaos(k: &DMatrix<f64>, x: &DVector<f64>) -> Result<f64> {
    let kx = divergence_linear(k, x)?;
    Ok(kx.dot(x) - k.trace())
}

/// Scalar divergence of a vector field from its value and Jacobian at `x`:
/// `δv(x) = ⟨v(x), x⟩ − tr ∇v(x)`.
pub fn field_divergence(value: &DVector<f64>, jacobian: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    value.dot(x) - jacobian.trace()
}

/// Ornstein-Uhlenbeck operator `ℒf(x) = ⟨x, ∇f(x)⟩ − tr ∇²f(x)`.
pub fn ou_operator(f: &Functional, x: &[f64]) -> Result<f64> {
    f.check_point(x)?;
    let g = f.gradient(x);
    let h = f.hessian(x)?;
    Ok(g.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - h.trace())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityReport {
    pub min_eigenvalue: f64,
    /// Batch index where the minimum was found; `None` for exact evaluation.
    pub argmin: Option<usize>,
    pub exact: bool,
    pub tol: f64,
    /// `∇²f ⪰ −(1 + tol)·I`
    pub one_convex: bool,
    /// `∇²f ⪰ −tol·I`
    pub h_convex: bool,
    pub finite_differences: bool,
}

/// Smallest Hessian eigenvalue over the batch (exact for quadratic variants).
pub fn check_one_convex(f: &Functional, batch: &SampleBatch, tol: f64) -> Result<ConvexityReport> {
    let (min, argmin, exact) = match f {
        Functional::Constant(_) | Functional::Linear(_) | Functional::Quadratic { .. } => {
            (f.convexity_lower_bound().unwrap_or(0.0), None, true)
        }
        _ => {
            if let Some(d) = f.dim() {
                check_dim(d, batch.dim())?;
            }
            let mins = batch.par_map(|x| f.hessian(x).map(|h| min_eigenvalue(&h)));
            let mut best = (f64::INFINITY, 0);
            for (i, m) in mins.into_iter().enumerate() {
                let m = m?;
                if m < best.0 {
                    best = (m, i);
                }
            }
            (best.0, Some(best.1), false)
        }
    };
    Ok(ConvexityReport {
        min_eigenvalue: min,
        argmin,
        exact,
        tol,
        one_convex: min >= -1.0 - tol,
        h_convex: min >= -tol,
        finite_differences: f.uses_finite_differences(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn m(rows: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, data.len() / rows, data)
    }

    #[test]
    fn divergence_examples() {
        let x = DVector::from_vec(vec![3.0, 5.0]);
        assert_eq!(divergence_linear(&DMatrix::zeros(2, 2), &x).unwrap(), DVector::zeros(2));
        let id = DVector::from_vec(vec![1.0, 2.0]);
        assert_eq!(divergence_linear(&DMatrix::identity(2, 2), &id).unwrap(), id);
        let k = m(2, &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(divergence_linear(&k, &x).unwrap(), DVector::from_vec(vec![5.0, 0.0]));
        assert!(matches!(
            divergence_linear(&k, &DVector::zeros(3)),
            Err(OtError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn second_chaos_examples() {
        let x = DVector::from_vec(vec![2.0]);
        assert_eq!(second_chaos(&DMatrix::zeros(1, 1), &x).unwrap(), 0.0);
        assert_eq!(second_chaos(&DMatrix::identity(1, 1), &x).unwrap(), 3.0);
    }

    #[test]
    fn ou_examples() {
        assert_eq!(ou_operator(&Functional::Constant(4.0), &[1.0, 2.0]).unwrap(), 0.0);
        let half_sq = Functional::quadratic(DMatrix::identity(1, 1), DVector::zeros(1), 0.0).unwrap();
        assert_eq!(ou_operator(&half_sq, &[3.0]).unwrap(), 8.0);
        let h = DVector::from_vec(vec![1.0, -2.0]);
        let lin = Functional::Linear(h.clone());
        let x = [0.5, 0.25];
        assert_relative_eq!(ou_operator(&lin, &x).unwrap(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(ou_operator(&lin, &x).unwrap(), lin.value(&x));
    }

    #[test]
    fn custom_without_hessian_fails_unless_fallback() {
        let mut c = CustomFunctional {
            dim: 1,
            f: Arc::new(|x| x[0].powi(4)),
            gradient: None,
            hessian: None,
            allow_fd_fallback: false,
            convexity_lower_bound: None,
            depends_on_first: 1,
        };
        let f = Functional::Custom(c.clone());
        assert_eq!(ou_operator(&f, &[1.0]), Err(OtError::HessianUnavailable));
        c.allow_fd_fallback = true;
        let f = Functional::Custom(c);
        assert!(f.uses_finite_differences());
        // ℒ(x⁴) = 4x⁴ − 12x²
        assert_relative_eq!(ou_operator(&f, &[1.5]).unwrap(), 4.0 * 1.5f64.powi(4) - 12.0 * 2.25, epsilon = 1e-3);
    }

    #[test]
    fn convexity_examples() {
        let batch = GaussianSpace::new(2).unwrap().sample(64, 1).unwrap();
        let neg_half = Functional::quadratic(-DMatrix::identity(2, 2), DVector::zeros(2), 0.0).unwrap();
        let r = check_one_convex(&neg_half, &batch, 1e-12).unwrap();
        assert!(r.exact && r.one_convex && !r.h_convex);
        assert_eq!(r.min_eigenvalue, -1.0);
        let neg_one = Functional::quadratic(-2.0 * DMatrix::identity(2, 2), DVector::zeros(2), 0.0).unwrap();
        assert!(!check_one_convex(&neg_one, &batch, 1e-12).unwrap().one_convex);

        let b1 = GaussianSpace::new(1).unwrap().sample(64, 1).unwrap();
        let three_halves = Functional::separable(vec![ScalarFn::half_square(3.0)]);
        let r = check_one_convex(&three_halves, &b1, 1e-12).unwrap();
        assert!(!r.exact && r.h_convex);
        assert_relative_eq!(r.min_eigenvalue, 3.0);
    }

    #[test]
    fn separable_matches_quadratic_on_samples() {
        let batch = GaussianSpace::new(2).unwrap().sample(200, 5).unwrap();
        let sep = Functional::separable(vec![ScalarFn::half_square(0.5), ScalarFn::half_square(-0.3)]);
        let quad = Functional::quadratic(DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, -0.3])), DVector::zeros(2), 0.0)
            .unwrap();
        let a = check_one_convex(&sep, &batch, 1e-12).unwrap();
        let b = check_one_convex(&quad, &batch, 1e-12).unwrap();
        assert_relative_eq!(a.min_eigenvalue, b.min_eigenvalue, epsilon = 1e-14);
    }

    #[test]
    fn depends_on_first() {
        let s = m(3, &[1.0, 0.5, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(Functional::quadratic(s, DVector::zeros(3), 0.0).unwrap().depends_on_first(), 2);
        let sep = Functional::separable(vec![ScalarFn::half_square(1.0), ScalarFn::zero(), ScalarFn::zero()]);
        assert_eq!(sep.depends_on_first(), 1);
    }

    #[test]
    fn poly_convexity_bound() {
        assert_eq!(ScalarFn::Poly(vec![0.0, 0.0, 0.0, 0.0, 0.25]).convexity_lower_bound(), Some(0.0));
        assert_eq!(ScalarFn::half_square(3.0).convexity_lower_bound(), Some(3.0));
        assert_eq!(ScalarFn::Poly(vec![0.0, 0.0, 0.0, 1.0]).convexity_lower_bound(), Some(f64::NEG_INFINITY));
    }

    #[test]
    fn sampling_is_deterministic() {
        let space = GaussianSpace::new(3).unwrap();
        assert_eq!(space.sample(100, 9).unwrap(), space.sample(100, 9).unwrap());
        assert_ne!(space.sample(100, 9).unwrap(), space.sample(100, 10).unwrap());
        assert!(space.sample(0, 1).is_err());
        assert!(GaussianSpace::new(0).is_err());
    }

    #[test]
    fn mc_constant_has_zero_error() {
        let batch = GaussianSpace::new(1).unwrap().sample(10, 3).unwrap();
        let e = mc_expect(|_| 1.0, &batch).unwrap();
        assert_eq!((e.mean, e.se), (1.0, 0.0));
        let err = mc_expect(|x| if x[0] > 0.0 { f64::NAN } else { 0.0 }, &batch).unwrap_err();
        assert!(matches!(err, OtError::NonFinite { .. }));
    }
}
