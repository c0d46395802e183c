use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error in {func}: {detail}")]
    Domain { func: &'static str, detail: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e} after {evaluations} evaluations")]
    Quadrature {
        estimate: f64,
        error: f64,
        evaluations: usize,
    },

    #[error("covariance matrix is not numerically positive definite ({nodes} nodes)")]
    Factorization { nodes: usize },

    #[error("rank-deficient noise: Ran(sigma) = {{0}}")]
    ZeroNoise,

    #[error("model validation failed: {0}")]
    Validation(String),

    #[error("solution diverged at step {step} (t = {time})")]
    Divergence { step: usize, time: f64 },

    #[error("log-weight overflow at node {node}; max |driver| = {max_driver:e}")]
    WeightOverflow { node: usize, max_driver: f64 },

    #[error("parameter out of admissible range: {0}")]
    OutOfRange(String),

    #[error("insufficient data: {usable} usable points, need at least {needed}")]
    InsufficientData { usable: usize, needed: usize },

    #[error("unknown model '{0}'")]
    UnknownModel(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(func: &'static str, detail: impl Into<String>) -> Error {
    Error::Domain {
        func,
        detail: detail.into(),
    }
}
