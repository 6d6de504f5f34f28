use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("iteration diverged; last finite step norm {last_step_norm:e}")]
    Diverged { last_step_norm: f64 },

    #[error("reference solution not reached after {iterations} iterations (step norm {step_norm:e})")]
    ReferenceNotReached { iterations: usize, step_norm: f64 },

    #[error("inner Newton solve failed after {iterations} iterations (gradient norm {gradient_norm:e})")]
    InnerSolver { iterations: usize, gradient_norm: f64 },

    #[error("linear system is not positive definite")]
    NotPositiveDefinite,

    #[error("map produced a non-finite value while probing Jacobian column {column}")]
    NonFiniteProbe { column: usize },

    #[error("Jacobian undefined: component {index} sits {margin:e} from the prox threshold")]
    NonDifferentiable { index: usize, margin: f64 },

    #[error("no analytic Jacobian for problem kind `{0}`")]
    UnsupportedKind(String),

    #[error("eigenvalue iteration did not converge (eigenvalue index {index})")]
    EigenNoConvergence { index: usize },

    #[error("spectral radius {radius} is outside the domain of the closed-form coefficient")]
    OutOfDomain { radius: f64 },

    #[error("beta = -1 gives a degenerate circle")]
    DegenerateCircle,

    #[error("coefficient grid is empty")]
    EmptyGrid,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
