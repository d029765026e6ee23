//! Crate-wide error type.
//!
//! Variants map onto the failure classes surfaced by the CLI: usage problems,
//! malformed or mismatched data, and numerical breakdowns.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input document could not be decoded; the message names the offending field.
    #[error("parse error: {0}")]
    Parse(String),

    /// Input decoded but violates a declared shape or format contract.
    #[error("schema error: {0}")]
    Schema(String),

    /// A configuration value is invalid or unsatisfiable for the given data.
    #[error("configuration error: {0}")]
    Config(String),

    /// Dataset contents violate a precondition (missing labels, empty annotator lists, ...).
    #[error("data error: {0}")]
    Data(String),

    /// Requested split sizes cannot be met by the available data.
    #[error("sizing error: {0}")]
    Sizing(String),

    /// Numerical failure: non-finite values or a failed factorization.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// API misuse (mismatched argument lengths and similar).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable category name, used by the CLI to derive exit codes.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parse(_) => "parse",
            Error::Schema(_) => "schema",
            Error::Config(_) => "config",
            Error::Data(_) => "data",
            Error::Sizing(_) => "sizing",
            Error::Numerical(_) => "numerical",
            Error::Usage(_) => "usage",
            Error::Io(_) => "io",
        }
    }
}
