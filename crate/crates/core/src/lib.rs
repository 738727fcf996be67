//! Finite-dimensional optimal transport on Gaussian spaces.
//!
//! Standard Gaussian measure on `ℝⁿ` stands in for an abstract Wiener space
//! restricted to a regular finite-dimensional section. The crate provides the
//! Gaussian calculus (divergence, Ornstein-Uhlenbeck operator), the
//! Carleman-Fredholm determinant, polar factorization of linear
//! perturbations, transport solvers for the exactly solvable regimes, the
//! dimension-lifting machinery and an Itô representation on a time grid.

pub mod assignment;
pub mod det2;
pub mod dimlift;
pub mod error;
pub mod gaussian;
pub mod ito;
pub mod linalg;
pub mod monge_ampere;
pub mod polar;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod transport;

pub use error::{OtError, Result};
