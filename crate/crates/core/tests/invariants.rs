//! Property tests for the determinant, polar factorization and transport maps.

use nalgebra::{DMatrix, DVector};
use otlab_core::det2::{det2, det2_direct, log_det2, HsPerturbation};
use otlab_core::gaussian::Functional;
use otlab_core::linalg::identity;
use otlab_core::monge_ampere::{solve, LogConcaveDensity};
use otlab_core::polar::polar_factorize;
use otlab_core::transport::GridSpec;
use proptest::prelude::*;

fn matrix(n: usize, scale: f64) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, n * n).prop_map(move |v| DMatrix::from_vec(n, n, v) * scale)
}

/// Symmetric with every eigenvalue at least −0.9.
fn symmetric_above(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    matrix(n, 0.8).prop_map(|m| {
        let s = (&m + m.transpose()) * 0.5;
        let eig = s.symmetric_eigen();
        let vals = eig.eigenvalues.map(|v| v.max(-0.9));
        &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn det2_matches_definition(m in (1usize..6).prop_flat_map(|n| matrix(n, 0.4))) {
        let p = HsPerturbation::general(m).unwrap();
        let a = det2(&p);
        let b = det2_direct(&p);
        prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-12));
    }

    #[test]
    fn log_det2_is_non_positive(s in (1usize..6).prop_flat_map(symmetric_above)) {
        let p = HsPerturbation::symmetric(s).unwrap();
        prop_assert!(log_det2(&p).unwrap() <= 1e-14);
    }

    #[test]
    fn minus_log_det2_is_convex(
        (a, b) in (1usize..5).prop_flat_map(|n| (symmetric_above(n), symmetric_above(n))),
        t in 0.0..1.0f64,
    ) {
        let f = |k: DMatrix<f64>| -log_det2(&HsPerturbation::symmetric(k).unwrap()).unwrap();
        let mid = f(&a * t + &b * (1.0 - t));
        prop_assert!(mid <= t * f(a) + (1.0 - t) * f(b) + 1e-10);
    }

    #[test]
    fn det2_is_block_invariant(m in (1usize..5).prop_flat_map(|n| matrix(n, 0.4)), extra in 1usize..4) {
        let p = HsPerturbation::general(m).unwrap();
        let padded = p.padded(p.dim() + extra).unwrap();
        prop_assert!((det2(&padded) - det2(&p)).abs() <= 1e-12 * det2(&p).abs().max(1.0));
    }

    #[test]
    fn polar_factors_reconstruct(m in (1usize..7).prop_flat_map(|n| matrix(n, 0.3))) {
        let p = HsPerturbation::general(m.clone()).unwrap();
        let f = polar_factorize(&p).unwrap();
        let n = m.nrows();
        prop_assert!(f.reconstruction_error(&m) <= 1e-10);
        prop_assert!(f.isometry_error() <= 1e-10);
        prop_assert!((f.kbar.clone() - f.kbar.transpose()).amax() <= 1e-12);
        prop_assert!((identity(n) + &f.kbar).symmetric_eigen().eigenvalues.min() > 0.0);
        prop_assert!((f.rotation().determinant() - f.orientation).abs() <= 1e-10);
    }

    #[test]
    fn quadratic_target_map_is_monotone(s in (1usize..4).prop_flat_map(symmetric_above), x in prop::collection::vec(-3.0..3.0f64, 8)) {
        let n = s.nrows();
        let d = LogConcaveDensity::new(Functional::quadratic(s.clone(), DVector::zeros(n), 0.0).unwrap(), n).unwrap();
        let t = solve(&d, GridSpec::default()).unwrap();
        let a: Vec<f64> = (0..n).map(|i| x[i]).collect();
        let b: Vec<f64> = (0..n).map(|i| x[i + 4]).collect();
        let ta = t.map(&a);
        let tb = t.map(&b);
        let da = DVector::from_vec(a) - DVector::from_vec(b);
        prop_assert!((ta - tb).dot(&da) >= -1e-12);
    }
}
