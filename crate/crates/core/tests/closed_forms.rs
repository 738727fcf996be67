//! End-to-end checks against hand-computed values.

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use otlab_core::det2::{det2, HsPerturbation};
use otlab_core::dimlift::condition_density;
use otlab_core::gaussian::{Functional, GaussianSpace, ScalarFn};
use otlab_core::ito::{ItoModel, DriftMethod, PathBatch, PathFunctional, TimeGrid};
use otlab_core::monge_ampere::{discrete_ot_oracle, ma_residual, solve, LogConcaveDensity};
use otlab_core::polar::polar_factorize;
use otlab_core::transport::GridSpec;

fn canonical() -> LogConcaveDensity {
    LogConcaveDensity::new(Functional::quadratic(DMatrix::from_element(1, 1, 3.0), DVector::zeros(1), 0.0).unwrap(), 1).unwrap()
}

#[test]
fn canonical_map_halves() {
    let t = solve(&canonical(), GridSpec::default()).unwrap();
    for x in [-2.0, -0.3, 0.0, 1.7] {
        assert_relative_eq!(t.map(&[x])[0], 0.5 * x, epsilon = 1e-14);
    }
}

#[test]
fn rotation_instance_factors() {
    let k = DMatrix::from_row_slice(2, 2, &[0.0, 0.3, -0.3, 0.0]);
    let p = HsPerturbation::general(k).unwrap();
    assert_relative_eq!(det2(&p), 1.09, epsilon = 1e-14);
    let f = polar_factorize(&p).unwrap();
    assert_relative_eq!(f.kbar[(0, 0)], 1.09f64.sqrt() - 1.0, epsilon = 1e-14);
    assert_relative_eq!(f.kbar[(0, 1)], 0.0, epsilon = 1e-14);
    assert_eq!(f.orientation, 1.0);
}

#[test]
fn tabulated_quartic_solves_equation() {
    let d = LogConcaveDensity::new(Functional::separable(vec![ScalarFn::Poly(vec![0.0, 0.0, 0.0, 0.0, 0.25])]), 1).unwrap();
    let t = solve(&d, GridSpec::default()).unwrap();
    assert!(t.is_tabulated());
    let probes = GaussianSpace::new(1).unwrap().sample(500, 7).unwrap();
    assert!(ma_residual(&t, &d, &probes, None).unwrap().passed());
}

#[test]
fn discrete_oracle_recovers_sorted_matching() {
    let x: Vec<DVector<f64>> = [0.3, -1.0, 2.0, 0.9].iter().map(|&v| DVector::from_element(1, v)).collect();
    let y: Vec<DVector<f64>> = [1.0, 4.0, -2.0, 0.6].iter().map(|&v| DVector::from_element(1, v)).collect();
    let ot = discrete_ot_oracle(&x, &y, None).unwrap();
    // sorted order pairs -1→-2, 0.3→0.6, 0.9→1, 2→4
    assert_eq!(ot.assignment, vec![3, 2, 1, 0]);
}

#[test]
fn conditioning_coupled_quadratic() {
    let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
    let d = LogConcaveDensity::new(Functional::quadratic(s, DVector::zeros(2), 0.0).unwrap(), 2).unwrap();
    let c = condition_density(&d, 1, None).unwrap();
    // f₁ = (7/16)x² + ½log 2
    assert_relative_eq!(c.f_n().value(&[1.0]), 7.0 / 16.0 + 0.5 * 2f64.ln(), epsilon = 1e-14);
    assert_relative_eq!(c.density.log_c(), d.log_c(), epsilon = 1e-12);
}

#[test]
fn quadratic_path_transport_scales_endpoint() {
    let grid = TimeGrid::uniform(8).unwrap();
    let model = ItoModel::new(PathFunctional::quadratic_endpoint(3.0, 8), &grid, DriftMethod::ClosedForm).unwrap();
    let batch = PathBatch::simulate(&grid, 20, 3).unwrap();
    for j in 0..batch.count() {
        let w = batch.path(j);
        let t = model.transport.path(batch.increments(j));
        assert_relative_eq!(t[7], 0.5 * w[7], epsilon = 1e-12);
    }
}
