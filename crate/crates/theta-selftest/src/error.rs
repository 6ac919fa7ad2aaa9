use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("solver did not converge after {iterations} iterations (primal residual {primal_residual:.3e}, dual residual {dual_residual:.3e}, gap {gap:.3e})")]
    NoConvergence {
        iterations: usize,
        primal_residual: f64,
        dual_residual: f64,
        gap: f64,
    },

    #[error("malformed certificate at entry ({row},{col}): {reason}")]
    CertificateMalformed { row: usize, col: usize, reason: String },

    #[error("certificate is not PSD: minimum eigenvalue {0:.3e}")]
    NotPsd(f64),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("candidate does not realize the optimizer: {0}")]
    NotAnOptimizer(String),
}

pub type Result<T> = std::result::Result<T, Error>;
