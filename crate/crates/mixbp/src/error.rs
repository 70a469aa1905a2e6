//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A variable assignment is outside the model's state space.
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    /// A caller-supplied argument violates a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An exact computation would exceed the configured enumeration cap.
    #[error("resource limit: {required} states exceed cap of {cap}")]
    ResourceLimit { required: u128, cap: u64 },

    /// Malformed input document.
    #[error("parse error at token {token}: {message}")]
    Parse { token: usize, message: String },

    /// Structurally inconsistent input (e.g. table size mismatch).
    #[error("structural error: {0}")]
    Structural(String),

    /// Beliefs failed a local-consistency check.
    #[error("inconsistent beliefs: max residual {residual}")]
    Inconsistent { residual: f64 },

    /// A probe found a zero belief where the model puts positive mass.
    #[error("structural violation: {0}")]
    StructuralViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
