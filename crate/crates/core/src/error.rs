use thiserror::Error;

/// Errors raised by the evaluation, solver, and diagnostic layers.
///
/// Numerical payloads are stored as `f64` regardless of the working scalar so
/// the error type stays non-generic.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum FlowError {
    /// A curvature vector left the open cone of the speed.
    #[error("curvatures {lambda:?} violate cone facet {facet} (normal {normal:?}, normal·λ = {value:e})")]
    ConeViolation {
        lambda: Vec<f64>,
        facet: usize,
        normal: Vec<f64>,
        value: f64,
    },
    /// Generic precondition failure with a human-readable reason.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },
    #[error("eigen-decomposition did not converge after {sweeps} sweeps")]
    EigenFailure { sweeps: usize },
    /// A support profile developed a nonpositive principal radius.
    #[error("convexity lost at node {node} (theta = {theta}): radii ({rho1:e}, {rho2:e})")]
    ConvexityLoss {
        node: usize,
        theta: f64,
        rho1: f64,
        rho2: f64,
    },
    #[error("parse error at {line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown speed id `{0}`")]
    UnknownSpeed(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for FlowError {
    fn from(e: std::io::Error) -> Self {
        FlowError::Io(e.to_string())
    }
}

pub type Result<T, E = FlowError> = std::result::Result<T, E>;
