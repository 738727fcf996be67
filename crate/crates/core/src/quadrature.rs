//! One-dimensional quadrature: adaptive Gauss-Kronrod (7/15), Gauss-Hermite
//! rules for the standard normal weight, and the normal distribution
//! functions the transport solvers are built on.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;
use libm::erfc;

use crate::error::{OtError, Result};

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

#[inline]
pub fn normal_log_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Φ(x), accurate in the lower tail.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// 1 − Φ(x), accurate in the upper tail.
#[inline]
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Single Gauss-Kronrod 15 point panel; returns (integral, |K15 − G7|).
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

const MAX_PANELS: usize = 4000;

/// Globally adaptive Gauss-Kronrod integration of `f` over `[a, b]`.
///
/// Stops when the summed error estimate is below `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<Integral> {
    if a == b {
        return Ok(Integral { value: 0.0, error: 0.0, panels: 0 });
    }
    let (value, error) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    let mut panels = 1;
    loop {
        if !total.is_finite() {
            return Err(OtError::QuadratureFailure(format!("non-finite integrand on [{a}, {b}]")));
        }
        if total_err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        if panels >= MAX_PANELS {
            return Err(OtError::QuadratureFailure(format!(
                "no convergence on [{a}, {b}] after {panels} panels (error {total_err:e})"
            )));
        }
        let worst = heap.pop().expect("heap never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine resolution
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
        panels += 1;
    }
    // resum to shed accumulated cancellation in the running total
    let mut parts: Vec<&Panel> = heap.iter().collect();
    parts.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = parts.iter().map(|p| p.value).sum();
    let error = parts.iter().map(|p| p.error).sum();
    Ok(Integral { value, error, panels })
}

/// Default half-width for integrals against the standard normal weight.
pub const GAUSSIAN_RADIUS: f64 = 30.0;

/// E[h(Z)], Z ~ N(0,1), by adaptive quadrature over `[-radius, radius]`.
/// `h` is never evaluated where the normal weight underflows to zero.
pub fn gaussian_expect<F: Fn(f64) -> f64>(h: F, radius: f64, abs_tol: f64) -> Result<Integral> {
    integrate(
        |x| {
            let w = normal_pdf(x);
            if w == 0.0 {
                0.0
            } else {
                h(x) * w
            }
        },
        -radius,
        radius,
        abs_tol,
        1e-13,
    )
}

/// Two-dimensional E[h(Z₁, Z₂)] under the standard normal by nested adaptive quadrature.
pub fn gaussian_expect_2d<F: Fn(f64, f64) -> f64>(h: F, radius: f64, abs_tol: f64) -> Result<Integral> {
    let inner_failure = std::cell::Cell::new(None);
    let outer = integrate(
        |x| {
            let wx = normal_pdf(x);
            if wx == 0.0 {
                return 0.0;
            }
            match gaussian_expect(|y| h(x, y), radius, abs_tol * 0.1) {
                Ok(i) => i.value * wx,
                Err(e) => {
                    inner_failure.set(Some(e));
                    f64::NAN
                }
            }
        },
        -radius,
        radius,
        abs_tol,
        1e-12,
    );
    if let Some(e) = inner_failure.take() {
        return Err(e);
    }
    outer
}

/// Gauss-Hermite rule for the standard normal weight (probabilists' Hermite
/// polynomials) via Golub-Welsch: `Σ wᵢ g(xᵢ) ≈ E[g(Z)]`, weights sum to 1.
pub fn gauss_hermite(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "Gauss-Hermite order must be positive");
    let mut jacobi = DMatrix::<f64>::zeros(order, order);
    for k in 1..order {
        let b = (k as f64).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // symmetrize nodes and weights; the eigen-solver leaves ~1e-15 asymmetry
    let n = pairs.len();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (pairs[j].0 - pairs[i].0);
        let w = 0.5 * (pairs[i].1 + pairs[j].1);
        pairs[i] = (-x, w);
        pairs[j] = (x, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    pairs.into_iter().map(|(x, w)| (x, w / total)).unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomial_exactly() {
        let i = integrate(|x| x.powi(5) - 2.0 * x * x + 1.0, -1.0, 2.0, 1e-14, 1e-14).unwrap();
        let exact = (64.0 - 1.0) / 6.0 - 2.0 * (8.0 + 1.0) / 3.0 + 3.0;
        assert!((i.value - exact).abs() < 1e-12);
    }

    #[test]
    fn gaussian_moments() {
        let m2 = gaussian_expect(|x| x * x, GAUSSIAN_RADIUS, 1e-14).unwrap().value;
        let m4 = gaussian_expect(|x| x.powi(4), GAUSSIAN_RADIUS, 1e-14).unwrap().value;
        assert!((m2 - 1.0).abs() < 1e-12);
        assert!((m4 - 3.0).abs() < 1e-12);
        // E[e^{-3x²/2}] = 1/2
        let c = gaussian_expect(|x| (-1.5 * x * x).exp(), GAUSSIAN_RADIUS, 1e-15).unwrap().value;
        assert!((c - 0.5).abs() < 1e-13);
    }

    #[test]
    fn gauss_hermite_moments() {
        let (x, w) = gauss_hermite(20);
        let m = |k: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum::<f64>();
        assert!((m(0) - 1.0).abs() < 1e-14);
        assert!(m(1).abs() < 1e-14);
        assert!((m(2) - 1.0).abs() < 1e-12);
        assert!((m(4) - 3.0).abs() < 1e-11);
        assert!((m(6) - 15.0).abs() < 1e-10);
    }

    #[test]
    fn normal_tails_are_complementary() {
        for &x in &[-8.0, -3.0, 0.0, 0.7, 5.0] {
            assert!((normal_cdf(x) + normal_sf(x) - 1.0).abs() < 1e-15);
        }
        assert!((normal_cdf(-7.0) - 1.279_812_543_885_835e-12).abs() < 1e-25);
    }

    #[test]
    fn two_dimensional_expectation() {
        let v = gaussian_expect_2d(|x, y| x * x * y * y + x, 12.0, 1e-12).unwrap().value;
        assert!((v - 1.0).abs() < 1e-10);
    }
}
