//! Linear Gaussian transport: polar factorization of `I+K`, the Girsanov
//! density of `x ↦ (I+K)x`, Kantorovitch potentials, rotation minimality and
//! Gaussian targets via the positive square root.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::assignment::solve_assignment;
use crate::det2::{log_det2, signed_log_det2, HsPerturbation};
use crate::error::{check_dim, OtError, Result};
use crate::gaussian::{second_chaos, Functional, McEstimate, SampleBatch};
use crate::linalg::{
    antisymmetric_part, gaussian_vector, identity, max_abs, min_eigenvalue, random_orthogonal, sym_inverse,
    sym_log_det, sym_sqrt, symmetrize, to_rows,
};
use crate::report::{Check, Provenance, Report};
use crate::rng::{derive_seed, stream};
use crate::transport::{cyclic_monotonicity, QuadraticMap, TransportSolution};

/// Smallest singular value of `I+K` accepted by the factorization.
pub const SINGULAR_VALUE_FLOOR: f64 = 1e-12;

/// `I+K = (I+K̄)(I+A)` with `I+K̄` symmetric positive definite and `I+A` orthogonal.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarFactors {
    pub kbar: DMatrix<f64>,
    pub a: DMatrix<f64>,
    /// `det(I+A)`, either `+1` or `−1`.
    pub orientation: f64,
}

impl PolarFactors {
    pub fn dim(&self) -> usize {
        self.kbar.nrows()
    }

    /// `I + K̄`
    pub fn positive(&self) -> DMatrix<f64> {
        identity(self.dim()) + &self.kbar
    }

    /// `I + A`
    pub fn rotation(&self) -> DMatrix<f64> {
        identity(self.dim()) + &self.a
    }

    /// `max |K̄ + A + K̄A − K|`
    pub fn reconstruction_error(&self, k: &DMatrix<f64>) -> f64 {
        max_abs(&(&self.kbar + &self.a + &self.kbar * &self.a - k))
    }

    /// `max |A + Aᵀ + AᵀA|`
    pub fn isometry_error(&self) -> f64 {
        max_abs(&(&self.a + self.a.transpose() + self.a.transpose() * &self.a))
    }
}

/// Left polar factorization through the SVD `I+K = UΣVᵀ`:
/// `I+K̄ = UΣUᵀ`, `I+A = UVᵀ`.
pub fn polar_factorize(p: &HsPerturbation) -> Result<PolarFactors> {
    let n = p.dim();
    let m = identity(n) + p.matrix();
    let svd = m.svd(true, true);
    let sigma_min = svd.singular_values.min();
    if sigma_min <= SINGULAR_VALUE_FLOOR {
        return Err(OtError::SingularPerturbation(format!("smallest singular value of I+K is {sigma_min:e}")));
    }
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let pos = symmetrize(&(&u * DMatrix::from_diagonal(&svd.singular_values) * u.transpose()));
    let rot = &u * &v_t;
    let orientation = if rot.determinant() < 0.0 { -1.0 } else { 1.0 };
    Ok(PolarFactors { kbar: pos - identity(n), a: rot - identity(n), orientation })
}

/// `Λ_K(x) = det₂(I+K)·exp{−δ²K(x) − ½|Kx|²}`, the Jacobian making
/// `E[g((I+K)x)·|Λ_K(x)|] = E[g]`.
pub fn jacobian_lambda(p: &HsPerturbation, x: &DVector<f64>) -> Result<f64> {
    let s = log_jacobian_lambda(p, x)?;
    Ok(s.0 * s.1.exp())
}

/// Sign and `log|Λ_K(x)|`.
pub fn log_jacobian_lambda(p: &HsPerturbation, x: &DVector<f64>) -> Result<(f64, f64)> {
    let d = signed_log_det2(p);
    let chaos = second_chaos(p.matrix(), x)?;
    let kx = p.matrix() * x;
    Ok((d.sign, d.log_abs - chaos - 0.5 * kx.norm_squared()))
}

/// `log L(y)` for the density of `N(0, C)` against the standard Gaussian.
fn gaussian_log_ratio(c_inv: &DMatrix<f64>, log_det_c: f64, y: &DVector<f64>) -> f64 {
    -0.5 * y.dot(&(c_inv * y)) - 0.5 * log_det_c + 0.5 * y.norm_squared()
}

/// Verifies `L(y)·|Λ_K(V(y))| = 1` on batch images, the entropy identity
/// `E[L log L] = −E[log|Λ_K|]` against the closed-form relative entropy, and
/// the pushforward covariance.
pub fn girsanov_density_check(p: &HsPerturbation, batch: &SampleBatch) -> Result<Report> {
    let n = p.dim();
    check_dim(n, batch.dim())?;
    let ik = identity(n) + p.matrix();
    let lu = ik.clone().lu();
    let c = &ik * ik.transpose();
    let c_inv = sym_inverse(&c)?;
    let log_det_c = sym_log_det(&c)?;
    let rows = batch.par_map(|x| -> Result<(f64, f64, f64)> {
        let x = DVector::from_column_slice(x);
        let y = &ik * &x;
        let v = lu
            .solve(&y)
            .ok_or_else(|| OtError::SingularPerturbation("I + K is singular".into()))?;
        let log_l = gaussian_log_ratio(&c_inv, log_det_c, &y);
        let (_, log_lambda_v) = log_jacobian_lambda(p, &v)?;
        let (_, log_lambda_x) = log_jacobian_lambda(p, &x)?;
        Ok(((log_l + log_lambda_v).exp_m1().abs(), log_l, -log_lambda_x))
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let pointwise = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let lhs = McEstimate::from_values(&rows.iter().map(|r| r.1).collect::<Vec<_>>())?;
    let rhs = McEstimate::from_values(&rows.iter().map(|r| r.2).collect::<Vec<_>>())?;
    let kl = 0.5 * (c.trace() - n as f64 - log_det_c);

    let mut report = Report::new("girsanov-density");
    report.check(Check::le("pointwise_max_rel_error", pointwise, 1e-8, Provenance::Algebraic));
    report.metric("relative_entropy_closed_form", kl);
    report.metric_se("e_l_log_l_mc", lhs.mean, lhs.se);
    report.metric_se("minus_e_log_abs_lambda_mc", rhs.mean, rhs.se);
    report.check(
        Check::le("e_l_log_l_vs_closed_form", (lhs.mean - kl).abs(), 4.0 * lhs.se, Provenance::MonteCarlo).with_se(lhs.se),
    );
    report.check(
        Check::le("minus_e_log_lambda_vs_closed_form", (rhs.mean - kl).abs(), 4.0 * rhs.se, Provenance::MonteCarlo)
            .with_se(rhs.se),
    );
    report.check(Check::le("entropy_identity_gap", (lhs.mean - rhs.mean).abs(), 4.0 * lhs.se.max(rhs.se), Provenance::MonteCarlo));
    report.absorb("", pushforward_covariance_check(&ik, batch)?);
    Ok(report)
}

/// Empirical covariance of `(I+K)x` against `(I+K)(I+K)ᵀ`, entrywise at 4·SE.
pub fn pushforward_covariance_check(map: &DMatrix<f64>, batch: &SampleBatch) -> Result<Report> {
    let n = map.nrows();
    check_dim(map.ncols(), batch.dim())?;
    let c = map * map.transpose();
    let images: Vec<DVector<f64>> = batch.par_map(|x| map * DVector::from_column_slice(x));
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            let est = McEstimate::from_values(&images.iter().map(|y| y[i] * y[j]).collect::<Vec<_>>())?;
            let sd = (c[(i, i)] * c[(j, j)] + c[(i, j)] * c[(i, j)]).sqrt() / (batch.count() as f64).sqrt();
            worst = worst.max((est.mean - c[(i, j)]).abs() / sd.max(f64::MIN_POSITIVE));
        }
    }
    let mut report = Report::new("pushforward-covariance");
    report.check(Check::le("covariance_max_z", worst, 4.0, Provenance::MonteCarlo));
    Ok(report)
}

/// Kantorovitch potentials `φ = ½δ²K̄` and `ψ = −½δ²((I+K̄)^{−1}K̄)` with their
/// structural checks.
#[derive(Debug, Clone)]
pub struct Potentials {
    pub phi: Functional,
    pub psi: Functional,
    pub report: Report,
}

pub fn potentials(f: &PolarFactors, seed: u64) -> Result<Potentials> {
    let n = f.dim();
    let pos = f.positive();
    let b = sym_inverse(&pos)? * &f.kbar;
    let b = symmetrize(&b);
    let phi = Functional::quadratic(f.kbar.clone(), DVector::zeros(n), -0.5 * f.kbar.trace())?;
    let psi = Functional::quadratic(-&b, DVector::zeros(n), 0.5 * b.trace())?;
    let mut report = Report::new("potentials");
    // (I + ∇ψ)∘(I + ∇φ) = (I − B)(I + K̄)
    let composition = max_abs(&((identity(n) - &b) * &pos - identity(n)));
    report.check(Check::le("composition_error", composition, 1e-10, Provenance::Algebraic));
    report.check(Check::ge("phi_hessian_min_eigenvalue", min_eigenvalue(&f.kbar), -1.0, Provenance::Algebraic));
    let t = TransportSolution::Quadratic(QuadraticMap::new(f.kbar.clone(), DVector::zeros(n))?);
    let cyc = cyclic_monotonicity(&|x: &[f64]| t.map(x), n, 1000, 4, derive_seed(seed, "cycles"), 1e-10);
    report.absorb("", cyc);
    Ok(Potentials { phi, psi, report })
}

/// Procrustes optimality of `I+A`: `‖(I+K) − (I+A)‖_F ≤ ‖(I+K) − O‖_F` for
/// random orthogonal `O`; under the standard Gaussian these squared norms
/// equal `E|U(x) − Ox|²`, which is also estimated on a sample.
pub fn minimal_rotation_check(p: &HsPerturbation, trials: usize, seed: u64) -> Result<Report> {
    let f = polar_factorize(p)?;
    let n = p.dim();
    let ik = identity(n) + p.matrix();
    let rot = f.rotation();
    let optimal = (&ik - &rot).norm_squared();
    let mut report = Report::new("minimal-rotation");
    report.metric("optimal_cost", optimal);
    let mut worst_gap = f64::INFINITY;
    let mut rng = stream(derive_seed(seed, "rotations"), 0);
    for _ in 0..trials {
        let o = random_orthogonal(n, &mut rng);
        let cost = (&ik - &o).norm_squared();
        worst_gap = worst_gap.min(cost - optimal);
    }
    if trials > 0 {
        report.check(Check::ge("min_gap_vs_random_rotations", worst_gap, -1e-10 * optimal.max(1.0), Provenance::Algebraic));
    }
    // equality branch: the factor itself
    let self_gap = (&ik - &rot).norm_squared() - optimal;
    report.check(Check::le("gap_at_polar_factor", self_gap.abs(), 1e-12, Provenance::Algebraic));
    // (I+K)(I+A)ᵀ must be symmetric positive definite
    let pt = &ik * rot.transpose();
    report.check(Check::le("optimality_condition_asymmetry", max_abs(&antisymmetric_part(&pt)), 1e-10, Provenance::Algebraic));
    report.check(Check::ge("optimality_condition_min_eigenvalue", min_eigenvalue(&pt), 0.0, Provenance::Algebraic));
    report.metric("orientation", f.orientation);
    // Monte-Carlo version of the optimal cost
    let mut rng = stream(derive_seed(seed, "mc-cost"), 0);
    let diff = &ik - &rot;
    let values: Vec<f64> = (0..20_000).map(|_| (&diff * gaussian_vector(n, &mut rng)).norm_squared()).collect();
    let mc = McEstimate::from_values(&values)?;
    report.metric_se("optimal_cost_mc", mc.mean, mc.se);
    report.check(Check::le("optimal_cost_mc_gap", (mc.mean - optimal).abs(), 4.0 * mc.se.max(1e-15), Provenance::MonteCarlo).with_se(mc.se));
    Ok(report)
}

/// Covariance `Q ≻ 0` of a centered Gaussian target.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTarget {
    q: DMatrix<f64>,
}

impl GaussianTarget {
    pub fn new(q: DMatrix<f64>) -> Result<Self> {
        if q.nrows() != q.ncols() || q.nrows() == 0 {
            return Err(OtError::InvalidArgument("covariance must be square and non-empty".into()));
        }
        let q = symmetrize(&q);
        let min = min_eigenvalue(&q);
        if min <= crate::linalg::PD_FLOOR {
            return Err(OtError::NotPositiveDefinite { min_eigenvalue: min });
        }
        Ok(Self { q })
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    /// `M = Q − I`
    pub fn m(&self) -> DMatrix<f64> {
        &self.q - identity(self.dim())
    }
}

/// `T = I + N` with `I + N = Q^{1/2}`; potential `φ = ½δ²N`.
pub fn gaussian_target_map(target: &GaussianTarget) -> Result<TransportSolution> {
    let n = target.dim();
    let root = sym_sqrt(target.covariance())?;
    let nmat = root - identity(n);
    Ok(TransportSolution::Quadratic(QuadraticMap::new(nmat, DVector::zeros(n))?))
}

/// Algebraic postconditions of `gaussian_target_map`.
pub fn gaussian_target_report(target: &GaussianTarget, t: &TransportSolution) -> Result<Report> {
    let mut report = Report::new("gaussian-target-map");
    let TransportSolution::Quadratic(q) = t else {
        return Err(OtError::InvalidArgument("expected a quadratic-potential map".into()));
    };
    let n = target.dim();
    let a = identity(n) + &q.n;
    let cov_err = max_abs(&(&a * a.transpose() - target.covariance()));
    report.check(Check::le("pushforward_covariance_error", cov_err, 1e-10 * max_abs(target.covariance()).max(1.0), Provenance::Algebraic));
    report.check(Check::ge("n_min_eigenvalue", min_eigenvalue(&q.n), -1.0, Provenance::Algebraic));
    let m_err = max_abs(&(&q.n * &q.n + &q.n * 2.0 - target.m()));
    report.check(Check::le("n_squared_plus_2n_minus_m", m_err, 1e-10 * max_abs(target.covariance()).max(1.0), Provenance::Algebraic));
    Ok(report)
}

/// Monte-Carlo estimate of `E[∇φ⊗∇φ] + 2E[∇²φ]` with entrywise standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredM {
    pub mean: DMatrix<f64>,
    pub se: DMatrix<f64>,
}

pub fn recover_m(t: &TransportSolution, batch: &SampleBatch) -> Result<RecoveredM> {
    let n = t.dim();
    check_dim(n, batch.dim())?;
    let samples: Vec<DMatrix<f64>> = batch.par_map(|x| {
        let g = t.grad_phi(x);
        &g * g.transpose() + t.hess_phi(x) * 2.0
    });
    let mut mean = DMatrix::zeros(n, n);
    let mut se = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let est = McEstimate::from_values(&samples.iter().map(|s| s[(i, j)]).collect::<Vec<_>>())?;
            mean[(i, j)] = est.mean;
            se[(i, j)] = est.se;
        }
    }
    Ok(RecoveredM { mean, se })
}

/// Compares `E[e^{i⟨α,T(x)⟩}]` with `e^{−½⟨Qα,α⟩}` at random frequencies,
/// real and imaginary parts separately at 4·SE.
pub fn characteristic_function_check(
    t: &TransportSolution,
    target: &GaussianTarget,
    batch: &SampleBatch,
    frequencies: usize,
    seed: u64,
) -> Result<Report> {
    let n = target.dim();
    check_dim(n, batch.dim())?;
    let images: Vec<DVector<f64>> = batch.par_map(|x| t.map(x));
    let mut rng = stream(derive_seed(seed, "frequencies"), 0);
    let mut worst = 0.0_f64;
    for _ in 0..frequencies {
        let alpha = gaussian_vector(n, &mut rng);
        let exact = (-0.5 * alpha.dot(&(target.covariance() * &alpha))).exp();
        let re = McEstimate::from_values(&images.iter().map(|y| alpha.dot(y).cos()).collect::<Vec<_>>())?;
        let im = McEstimate::from_values(&images.iter().map(|y| alpha.dot(y).sin()).collect::<Vec<_>>())?;
        worst = worst.max((re.mean - exact).abs() / re.se.max(1e-300));
        worst = worst.max(im.mean.abs() / im.se.max(1e-300));
    }
    let mut report = Report::new("characteristic-function");
    report.metric("frequencies", frequencies as f64);
    report.check(Check::le("max_z_score", worst, 4.0, Provenance::MonteCarlo));
    Ok(report)
}

/// Result of the discrete polar factorization of a sampled map.
#[derive(Debug, Clone)]
pub struct GeneralFactorization {
    /// `R(xⱼ) = ρ_{r_index[j]}`
    pub r_index: Vec<usize>,
    /// Optimal assignment from the ρ cloud to the `U` cloud: `T(ρᵢ) = U(x_{t_index[i]})`.
    pub t_index: Vec<usize>,
    pub report: Report,
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0_f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value at level 0.001.
pub fn ks_critical(na: usize, nb: usize) -> f64 {
    let c = (-(0.001f64 / 2.0).ln() / 2.0).sqrt();
    c * ((na + nb) as f64 / (na * nb) as f64).sqrt()
}

/// Discrete version of `U = T∘R`: the optimal assignment `T` between the ρ
/// cloud and `{U(xⱼ)}` yields `R = T^{−1}∘U` on samples. `fresh` is an
/// independent ρ sample for the distribution test.
pub fn factorize_general_map(
    u_images: &[DVector<f64>],
    rho: &[DVector<f64>],
    fresh: &[DVector<f64>],
    permutation_trials: usize,
    seed: u64,
) -> Result<GeneralFactorization> {
    let m = u_images.len();
    if m != rho.len() {
        return Err(OtError::OracleInfeasible(format!("cloud sizes differ: {} vs {}", m, rho.len())));
    }
    if m == 0 {
        return Err(OtError::OracleInfeasible("empty clouds".into()));
    }
    let dim = rho[0].len();
    let cost: Vec<f64> = (0..m * m)
        .map(|k| (&rho[k / m] - &u_images[k % m]).norm_squared())
        .collect();
    let (t_index, total) = solve_assignment(&cost, m)?;
    let mut r_index = vec![0usize; m];
    for (i, &j) in t_index.iter().enumerate() {
        r_index[j] = i;
    }
    let mut report = Report::new("general-factorization");
    report.metric("assignment_cost_mean", total / m as f64);
    // (a) R-images against an independent ρ sample, per coordinate
    if !fresh.is_empty() {
        let mut worst = 0.0_f64;
        for c in 0..dim {
            let a: Vec<f64> = r_index.iter().map(|&i| rho[i][c]).collect();
            let b: Vec<f64> = fresh.iter().map(|v| v[c]).collect();
            worst = worst.max(ks_two_sample(&a, &b) / ks_critical(a.len(), b.len()));
        }
        report.check(Check::le("ks_ratio_to_critical", worst, 1.0, Provenance::MonteCarlo));
    }
    // (b) minimality against random permutations of the ρ cloud
    let mut rng = stream(derive_seed(seed, "permutations"), 0);
    let mut min_gap = f64::INFINITY;
    for _ in 0..permutation_trials {
        use rand::seq::SliceRandom;
        let mut perm: Vec<usize> = (0..m).collect();
        perm.shuffle(&mut rng);
        let c: f64 = perm.iter().enumerate().map(|(j, &i)| cost[i * m + j]).sum();
        min_gap = min_gap.min(c - total);
    }
    if permutation_trials > 0 {
        report.check(Check::ge("min_gap_vs_random_permutations", min_gap, -1e-9 * total.max(1.0), Provenance::Algebraic));
    }
    Ok(GeneralFactorization { r_index, t_index, report })
}

/// The linear field `(K − K̄)x` split into gradient (symmetric) and
/// divergence-free (antisymmetric) parts, beside `K̂ − K̄`. Nothing is asserted.
#[derive(Debug, Clone, Serialize)]
pub struct HelmholtzExploration {
    pub field: Vec<Vec<f64>>,
    pub gradient_part: Vec<Vec<f64>>,
    pub divergence_free_part: Vec<Vec<f64>>,
    pub khat_minus_kbar: Vec<Vec<f64>>,
    /// `max |δ(Ax)|` over probe points for the antisymmetric part.
    pub divergence_of_free_part: f64,
}

pub fn helmholtz_explore(p: &HsPerturbation, batch: &SampleBatch) -> Result<(HelmholtzExploration, Report)> {
    let f = polar_factorize(p)?;
    let field = p.matrix() - &f.kbar;
    let grad = symmetrize(&field);
    let free = antisymmetric_part(&field);
    let khat = symmetrize(p.matrix());
    let diff = &khat - &f.kbar;
    let div = batch
        .rows()
        .map(|x| second_chaos(&free, &DVector::from_column_slice(x)).map(f64::abs))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let mut report = Report::new("helmholtz-explore");
    report.metric("field_norm", field.norm());
    report.metric("gradient_part_norm", grad.norm());
    report.metric("divergence_free_part_norm", free.norm());
    report.metric("khat_minus_kbar_norm", diff.norm());
    report.metric("gradient_part_minus_khat_minus_kbar_norm", (&grad - &diff).norm());
    report.check(Check::le("divergence_of_free_part", div, 1e-12, Provenance::Algebraic).report_only());
    report.note("projection convention for the divergence-free part is ambiguous; no identity asserted");
    let out = HelmholtzExploration {
        field: to_rows(&field),
        gradient_part: to_rows(&grad),
        divergence_free_part: to_rows(&free),
        khat_minus_kbar: to_rows(&diff),
        divergence_of_free_part: div,
    };
    Ok((out, report))
}

/// For symmetric `K̄` with `I+K̄ ≻ 0`, the map `Θ = (I+K̄)^{−1}` (potential
/// `−½δ²((I+K̄)^{−1}K̄)`) is a right inverse of `T = I+K̄`.
pub fn right_inverse_check(kbar: &HsPerturbation, batch: &SampleBatch) -> Result<Report> {
    if !kbar.is_symmetric() {
        return Err(OtError::InvalidArgument("right inverse check needs a symmetric perturbation".into()));
    }
    let n = kbar.dim();
    check_dim(n, batch.dim())?;
    log_det2(kbar)?;
    let pos = identity(n) + kbar.matrix();
    let theta = sym_inverse(&pos).map_err(|_| OtError::SingularPerturbation("I + K̄ is not invertible".into()))?;
    let residual = batch
        .par_map(|x| {
            let x = DVector::from_column_slice(x);
            (&pos * (&theta * &x) - &x).amax() / x.amax().max(1.0)
        })
        .into_iter()
        .fold(0.0, f64::max);
    let mut report = Report::new("right-inverse");
    report.check(Check::le("max_residual", residual, 1e-10, Provenance::Algebraic));
    report.check(Check::ge("theta_potential_min_eigenvalue", min_eigenvalue(&(&theta - identity(n))), -1.0, Provenance::Algebraic));
    Ok(report)
}
