use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no convergence: {context} (worst residual {worst_residual:.3e})")]
    NoConvergence { context: String, worst_residual: f64 },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("eigen-pairing failed: {0}")]
    Pairing(String),
    #[error("singular matrix in {0}")]
    Singular(String),
    #[error("counterexample found: {0}")]
    Counterexample(String),
}

pub type Result<T> = std::result::Result<T, Error>;
