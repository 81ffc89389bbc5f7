//! Crate-wide error type.
//!
//! Every fallible constructor and solver in the crate returns [`Result`];
//! the variants distinguish bad user input ([`Error::InvalidParameter`]),
//! structurally impossible requests ([`Error::EmptyClass`],
//! [`Error::MissingLabels`]), guard rails against runaway allocations
//! ([`Error::SizeCap`]), and numerical failure ([`Error::Numerical`]).

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by graph construction, reduction, and the solvers.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// A parameter is outside the domain of the requested family or operation.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A requested arc class does not exist for the given decomposition
    /// (e.g. the downhill class at the innermost shell).
    #[error("empty arc class: {0}")]
    EmptyClass(String),

    /// The operation needs vertex labels (subset or bit-pattern) that the
    /// graph does not carry.
    #[error("missing vertex labels: {0}")]
    MissingLabels(String),

    /// The instance is too large for a dense materialisation; use the
    /// streaming walk or the reduced model instead.
    #[error("size cap exceeded: {0}")]
    SizeCap(String),

    /// An iterative numerical routine failed to produce a usable answer.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// Shorthand for an [`Error::InvalidParameter`] with a formatted message.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
