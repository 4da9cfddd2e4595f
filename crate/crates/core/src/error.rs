use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two inputs that must agree in size do not.
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    /// Inconsistent configuration (arity mismatches, invalid parameters).
    #[error("configuration error: {0}")]
    Config(String),

    /// Text input that could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// An exhaustive computation larger than the permitted budget.
    #[error("enumeration of {required} outcomes exceeds the budget of {budget}")]
    Budget { required: u128, budget: u128 },

    /// The secondary link would violate the primary receiver's SINR floor.
    #[error("PU SINR guard failed: SINR {sinr:.4e} below threshold {threshold:.4e}")]
    SinrGuard { sinr: f64, threshold: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
