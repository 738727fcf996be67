use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OtError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular perturbation: {0}")]
    SingularPerturbation(String),

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("hessian unavailable for custom functional without evaluator")]
    HessianUnavailable,

    #[error("non-finite value {value} at sample index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),

    #[error("density is not integrable: {0}")]
    NonIntegrableDensity(String),

    #[error("discrete oracle infeasible: {0}")]
    OracleInfeasible(String),

    #[error("interpolated map is not monotone at t = {t} (derivative {derivative:e})")]
    NonMonotoneInterpolant { t: f64, derivative: f64 },

    #[error("{integrated} integrated dimensions exceed the quadrature limit of 3; select the Monte-Carlo method")]
    TooManyIntegratedDims { integrated: usize },

    #[error("transport regime not solvable: {0}")]
    UnsolvableRegime(String),

    #[error("degenerate importance weights: effective sample size {ess:.1} below floor {floor}")]
    DegenerateWeights { ess: f64, floor: f64 },
}

pub type Result<T> = std::result::Result<T, OtError>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(OtError::DimensionMismatch { expected, got })
    }
}
