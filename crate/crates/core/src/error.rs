use thiserror::Error;

/// Errors surfaced by the estimation library.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Structurally invalid input (shapes, missing values, bad configuration).
    #[error("invalid input: {0}")]
    Invalid(String),
    /// Tied observations where the model assumes a continuous response.
    #[error("tie error: {0}")]
    Ties(String),
    /// The numeric search failed to produce a usable optimum.
    #[error("optimization failed: {0}")]
    Optimization(String),
    /// An estimator could not be computed from the given data.
    #[error("estimation failed: {0}")]
    Estimation(String),
    /// A numeric kernel lost accuracy or failed to converge.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;
