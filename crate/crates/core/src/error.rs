//! Error type shared by all modules.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure classes map one-to-one onto the CLI exit codes: contract and parse
/// problems are validation errors (2), caps are resource errors (3), a checked
/// mathematical guarantee failing is a property falsification (4).
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on inputs was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A configured resource cap would be exceeded.
    #[error("resource cap exceeded: {0}")]
    Resource(String),

    /// A guarantee that is supposed to hold unconditionally was observed to
    /// fail. Carries enough context to reproduce the counterexample.
    #[error("property falsified: {0}")]
    PropertyFalsified(String),

    /// Malformed wire-format input.
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn resource(msg: impl Into<String>) -> Self {
        Error::Resource(msg.into())
    }

    pub(crate) fn falsified(msg: impl Into<String>) -> Self {
        Error::PropertyFalsified(msg.into())
    }
}
