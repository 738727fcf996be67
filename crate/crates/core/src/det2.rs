//! Carleman-Fredholm determinant `det₂(I+K) = det(I+K)·e^{−tr K}`.
//!
//! The symmetric path works on the spectrum of `K`; the general path
//! factorizes `I+K` with partial pivoting and tracks the sign. Both stay in
//! the log domain until the end.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{OtError, Result};
use crate::linalg::{max_abs, sym_eigen, symmetrize};

/// Distance from −1 below which an eigenvalue counts as singular.
pub const SINGULAR_EIGEN_MARGIN: f64 = 1e-12;

/// A square matrix standing in for a Hilbert-Schmidt perturbation of the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct HsPerturbation {
    k: DMatrix<f64>,
    symmetric: bool,
}

impl HsPerturbation {
    pub fn general(k: DMatrix<f64>) -> Result<Self> {
        if k.nrows() != k.ncols() || k.nrows() == 0 {
            return Err(OtError::InvalidArgument(format!(
                "perturbation must be square and non-empty, got {}×{}",
                k.nrows(),
                k.ncols()
            )));
        }
        Ok(Self { k, symmetric: false })
    }

    /// Symmetrizes `k` and selects the spectral path.
    pub fn symmetric(k: DMatrix<f64>) -> Result<Self> {
        let mut p = Self::general(k)?;
        p.k = symmetrize(&p.k);
        p.symmetric = true;
        Ok(p)
    }

    pub fn zero(n: usize) -> Self {
        Self { k: DMatrix::zeros(n, n), symmetric: true }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.k
    }
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }
    pub fn dim(&self) -> usize {
        self.k.nrows()
    }
    pub fn trace(&self) -> f64 {
        self.k.trace()
    }
    pub fn hs_norm(&self) -> f64 {
        self.k.norm()
    }

    /// Embeds `K` into the top-left block of a zero `n × n` matrix.
    pub fn padded(&self, n: usize) -> Result<Self> {
        if n < self.dim() {
            return Err(OtError::InvalidArgument("cannot pad to a smaller dimension".into()));
        }
        let mut k = DMatrix::zeros(n, n);
        k.view_mut((0, 0), (self.dim(), self.dim())).copy_from(&self.k);
        Ok(Self { k, symmetric: self.symmetric })
    }
}

/// `det₂` as sign and log-magnitude; sign 0 marks a singular `I+K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignedLog {
    pub sign: f64,
    pub log_abs: f64,
}

impl SignedLog {
    pub fn value(&self) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * self.log_abs.exp()
        }
    }
}

/// Signed log of `det₂(I+K)` through the path selected by the perturbation.
pub fn signed_log_det2(p: &HsPerturbation) -> SignedLog {
    if p.symmetric {
        let eig = sym_eigen(&p.k);
        let mut sign = 1.0;
        let mut log_abs = 0.0;
        for &l in eig.eigenvalues.iter() {
            let one_plus = 1.0 + l;
            if one_plus == 0.0 {
                return SignedLog { sign: 0.0, log_abs: f64::NEG_INFINITY };
            }
            if one_plus < 0.0 {
                sign = -sign;
            }
            log_abs += ln_abs_one_plus(l) - l;
        }
        SignedLog { sign, log_abs }
    } else {
        let (sign, log_abs_det) = lu_signed_log_det(&(DMatrix::identity(p.dim(), p.dim()) + &p.k));
        SignedLog { sign, log_abs: log_abs_det - p.trace() }
    }
}

/// `ln|1 + l|`, through `ln_1p` where `1 + l > 0`.
fn ln_abs_one_plus(l: f64) -> f64 {
    if l > -1.0 {
        l.ln_1p()
    } else {
        (1.0 + l).abs().ln()
    }
}

/// `(sign, ln|det M|)` by LU with partial pivoting.
pub fn lu_signed_log_det(m: &DMatrix<f64>) -> (f64, f64) {
    let lu = m.clone().lu();
    let u = lu.u();
    let mut sign: f64 = lu.p().determinant();
    let mut log_abs = 0.0;
    for i in 0..u.nrows() {
        let d = u[(i, i)];
        if d == 0.0 {
            return (0.0, f64::NEG_INFINITY);
        }
        if d < 0.0 {
            sign = -sign;
        }
        log_abs += d.abs().ln();
    }
    (sign, log_abs)
}

pub fn det2(p: &HsPerturbation) -> f64 {
    signed_log_det2(p).value()
}

/// `log det₂(I+K)`; requires a positive determinant (spectrum above −1 on
/// the symmetric path).
pub fn log_det2(p: &HsPerturbation) -> Result<f64> {
    if p.symmetric {
        let eig = sym_eigen(&p.k);
        let mut acc = 0.0;
        for &l in eig.eigenvalues.iter() {
            if l <= -1.0 + SINGULAR_EIGEN_MARGIN {
                return Err(OtError::SingularPerturbation(format!("eigenvalue {l} ≤ −1")));
            }
            acc += l.ln_1p() - l;
        }
        Ok(acc)
    } else {
        let s = signed_log_det2(p);
        if s.sign <= 0.0 {
            return Err(OtError::SingularPerturbation("det(I+K) ≤ 0".into()));
        }
        Ok(s.log_abs)
    }
}

/// `det(I+K)·e^{−tr K}` straight from the definition, for cross-checks.
pub fn det2_direct(p: &HsPerturbation) -> f64 {
    (DMatrix::identity(p.dim(), p.dim()) + &p.k).determinant() * (-p.trace()).exp()
}

/// Largest asymmetry `‖K − Kᵀ‖_∞`.
pub fn asymmetry(k: &DMatrix<f64>) -> f64 {
    max_abs(&(k - k.transpose()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag1(v: f64) -> HsPerturbation {
        HsPerturbation::symmetric(DMatrix::from_element(1, 1, v)).unwrap()
    }

    #[test]
    fn det2_examples() {
        assert_eq!(det2(&HsPerturbation::zero(3)), 1.0);
        assert_relative_eq!(det2(&diag1(1.0)), 2.0 * (-1.0f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(det2(&diag1(-0.5)), 0.5 * 0.5f64.exp(), max_relative = 1e-15);
        assert_relative_eq!(det2(&diag1(-0.5)), 0.824_360_635_350_064, max_relative = 1e-14);
    }

    #[test]
    fn log_det2_examples() {
        assert_eq!(log_det2(&HsPerturbation::zero(2)).unwrap(), 0.0);
        assert_relative_eq!(log_det2(&diag1(-0.5)).unwrap(), 0.5f64.ln() + 0.5, max_relative = 1e-14);
        assert_relative_eq!(log_det2(&diag1(-0.5)).unwrap(), -0.193_147_180_559_945_3, max_relative = 1e-14);
    }

    #[test]
    fn singular_perturbations_are_rejected() {
        assert!(matches!(log_det2(&diag1(-1.0)), Err(OtError::SingularPerturbation(_))));
        assert!(matches!(log_det2(&diag1(-1.0 + 1e-13)), Err(OtError::SingularPerturbation(_))));
        assert_eq!(det2(&diag1(-1.0)), 0.0);
        let g = HsPerturbation::general(DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, 0.0])).unwrap();
        assert!(det2(&g) < 0.0);
        assert!(log_det2(&g).is_err());
    }

    #[test]
    fn general_and_symmetric_paths_agree() {
        let k = DMatrix::from_row_slice(3, 3, &[0.2, -0.1, 0.05, -0.1, 0.4, 0.3, 0.05, 0.3, -0.6]);
        let s = HsPerturbation::symmetric(k.clone()).unwrap();
        let g = HsPerturbation::general(k).unwrap();
        assert_relative_eq!(det2(&s), det2(&g), max_relative = 1e-12);
        assert_relative_eq!(log_det2(&s).unwrap(), log_det2(&g).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn rejects_non_square() {
        assert!(HsPerturbation::general(DMatrix::zeros(2, 3)).is_err());
    }
}
