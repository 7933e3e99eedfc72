use thiserror::Error;

/// Errors raised by manifold, divergence, and geodesic operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A coordinate, parameter, or outcome lies outside the open domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// The damped Newton conjugate solver did not reach its gradient tolerance.
    #[error("conjugate solve did not converge: {0}")]
    Convergence(String),

    #[error("metric is not symmetric positive definite: {0}")]
    Conditioning(String),

    #[error("invalid family configuration: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    /// A randomized construction could not be placed inside the domain.
    #[error("sampling exhausted: {0}")]
    SamplingExhausted(String),

    /// A quantity with a sign guarantee came out negative beyond rounding slack.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
