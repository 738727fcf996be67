//! Built-in named instances.

use nalgebra::{DMatrix, DVector};
use otlab_core::gaussian::{Functional, ScalarFn};
use otlab_core::ito::PathFunctional;
use otlab_core::monge_ampere::LogConcaveDensity;
use otlab_core::Result;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Instance {
    /// `K = 0`, `f ≡ 0`
    Zero,
    /// `f = (3/2)x²` in one dimension
    CanonicalQuadratic,
    /// Gaussian target `Q = diag(4, 1)`
    Gaussian4,
    /// `K = [[0, 0.3], [−0.3, 0]]`
    PolarRot03,
    /// Random perturbations for the polar and Girsanov batteries
    RandomOperators,
    /// `f = W₁` on paths
    LinearA1,
    /// `f = (3/2)W₁²` on paths
    QuadraticW1,
    /// `f = ½xᵀSx`, `S = [[1, ½], [½, 1]]`
    Coupled2d,
    /// `f = x⁴/4`
    Quartic1d,
    /// `f = (3/2)x₁² + x₂⁴/4`
    Product2d,
    /// Target `N(0, 4)`: `f = −(3/8)x²`, not H-convex
    N04Counterexample,
    /// Random polynomial field pairs for the divergence composition identity
    FieldPairs,
}

const ALL: [Instance; 12] = [
    Instance::Zero,
    Instance::CanonicalQuadratic,
    Instance::Gaussian4,
    Instance::PolarRot03,
    Instance::RandomOperators,
    Instance::LinearA1,
    Instance::QuadraticW1,
    Instance::Coupled2d,
    Instance::Quartic1d,
    Instance::Product2d,
    Instance::N04Counterexample,
    Instance::FieldPairs,
];

impl Instance {
    pub fn all() -> &'static [Instance] {
        &ALL
    }

    pub fn name(self) -> &'static str {
        match self {
            Instance::Zero => "zero",
            Instance::CanonicalQuadratic => "canonical-quadratic",
            Instance::Gaussian4 => "gaussian-4",
            Instance::PolarRot03 => "polar-rot-03",
            Instance::RandomOperators => "random-operators",
            Instance::LinearA1 => "linear-a1",
            Instance::QuadraticW1 => "quadratic-w1",
            Instance::Coupled2d => "coupled-2d",
            Instance::Quartic1d => "quartic-1d",
            Instance::Product2d => "product-2d",
            Instance::N04Counterexample => "n04-counterexample",
            Instance::FieldPairs => "field-pairs",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Instance::Zero => "K = 0, f = 0",
            Instance::CanonicalQuadratic => "f = (3/2)x², n = 1; target N(0, 1/4)",
            Instance::Gaussian4 => "Gaussian target Q = diag(4, 1)",
            Instance::PolarRot03 => "K = [[0, 0.3], [-0.3, 0]]",
            Instance::RandomOperators => "random K, n <= 8",
            Instance::LinearA1 => "path functional f = W_1",
            Instance::QuadraticW1 => "path functional f = (3/2)W_1²",
            Instance::Coupled2d => "f = ½xᵀSx, S = [[1, ½], [½, 1]]",
            Instance::Quartic1d => "f = x⁴/4, n = 1",
            Instance::Product2d => "f = (3/2)x₁² + x₂⁴/4",
            Instance::N04Counterexample => "target N(0, 4), f = -(3/8)x² (not H-convex)",
            Instance::FieldPairs => "random polynomial (ξ, u) pairs, n = 3",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        ALL.iter().copied().find(|i| i.name() == name)
    }

    pub fn names() -> Vec<&'static str> {
        ALL.iter().map(|i| i.name()).collect()
    }

    /// Target density for the transport instances.
    pub fn density(self) -> Option<Result<LogConcaveDensity>> {
        let (f, dim) = match self {
            Instance::Zero => (Functional::zero(), 1),
            Instance::CanonicalQuadratic => (scalar_quadratic(3.0), 1),
            Instance::Coupled2d => {
                let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
                match Functional::quadratic(s, DVector::zeros(2), 0.0) {
                    Ok(f) => (f, 2),
                    Err(e) => return Some(Err(e)),
                }
            }
            Instance::Quartic1d => (Functional::separable(vec![quartic()]), 1),
            Instance::Product2d => (Functional::separable(vec![ScalarFn::half_square(3.0), quartic()]), 2),
            Instance::N04Counterexample => (scalar_quadratic(-0.75), 1),
            _ => return None,
        };
        Some(LogConcaveDensity::new(f, dim))
    }

    /// The Hilbert-Schmidt perturbation the determinant suite evaluates.
    pub fn operator(self) -> Option<DMatrix<f64>> {
        match self {
            Instance::Zero => Some(DMatrix::zeros(1, 1)),
            Instance::CanonicalQuadratic => Some(DMatrix::from_element(1, 1, -0.5)),
            Instance::Gaussian4 => Some(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])),
            Instance::PolarRot03 => Some(DMatrix::from_row_slice(2, 2, &[0.0, 0.3, -0.3, 0.0])),
            _ => None,
        }
    }

    pub fn path_functional(self, m: usize) -> Option<PathFunctional> {
        match self {
            Instance::Zero => Some(PathFunctional::linear_endpoint(0.0, m)),
            Instance::LinearA1 => Some(PathFunctional::linear_endpoint(1.0, m)),
            Instance::QuadraticW1 => Some(PathFunctional::quadratic_endpoint(3.0, m)),
            _ => None,
        }
    }
}

fn scalar_quadratic(s: f64) -> Functional {
    Functional::Quadratic { s: DMatrix::from_element(1, 1, s), h: DVector::zeros(1), c: 0.0 }
}

fn quartic() -> ScalarFn {
    ScalarFn::Poly(vec![0.0, 0.0, 0.0, 0.0, 0.25])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for &i in Instance::all() {
            assert_eq!(Instance::parse(i.name()), Some(i));
        }
        assert_eq!(Instance::parse("nope"), None);
    }

    #[test]
    fn densities_build() {
        for &i in Instance::all() {
            if let Some(d) = i.density() {
                d.unwrap();
            }
        }
        let c = Instance::CanonicalQuadratic.density().unwrap().unwrap();
        assert!((c.c() - 0.5).abs() < 1e-15);
        assert!(!Instance::N04Counterexample.density().unwrap().unwrap().h_convex());
    }
}
