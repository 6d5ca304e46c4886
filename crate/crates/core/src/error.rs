use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("category label must be non-empty")]
    EmptyLabel,

    #[error("duplicate category {0:?}")]
    DuplicateCategory(String),

    #[error("invalid count {count} for category {label:?}: counts must be finite and non-negative")]
    InvalidCount { label: String, count: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty distribution: total count is zero")]
    EmptyDistribution,

    /// ρ^(1/n) fell below ½, where the threshold relation no longer holds.
    #[error("tau undefined: rho^(1/n) < 1/2 (rho = {rho:?}, n = {n}, rho^(1/n) = {root:?})")]
    TauUndefined { rho: f64, n: u64, root: f64 },

    #[error("non-finite intermediate while computing {0}")]
    NonFinite(&'static str),

    #[error("expected bin count out of envelope: n*p = {expected:?} exceeds {limit:?} (n = {n}, p = {p:?})")]
    OutOfEnvelope { n: u64, p: f64, expected: f64, limit: f64 },

    #[error("domain exhausted: requested {requested} categories but only {available} are available")]
    DomainExhausted { requested: u64, available: u64 },

    #[error("gave up after {attempts} rejected draws while sampling {requested} categories")]
    RetriesExhausted { requested: u64, attempts: u64 },

    #[error("{} active categor{} outside the declared domain: {}", .0.len(), if .0.len() == 1 { "y" } else { "ies" }, .0.join(", "))]
    OutOfDomain(Vec<String>),

    #[error("domain of size {size} is too large for full enumeration (limit {limit})")]
    DomainTooLarge { size: u64, limit: u64 },

    #[error("nothing to sample: the noisy histogram is empty")]
    NothingToSample,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{location}: malformed CSV: {message}")]
    Csv { location: String, message: String },

    #[error("column {column:?} not found; available columns: {}", .available.join(", "))]
    MissingColumn { column: String, available: Vec<String> },

    #[error("{location}: {message}")]
    Format { location: String, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for failures of the privacy/domain preconditions rather than of
    /// input parsing or I/O.
    pub fn is_validity(&self) -> bool {
        matches!(
            self,
            Error::TauUndefined { .. }
                | Error::OutOfEnvelope { .. }
                | Error::DomainExhausted { .. }
                | Error::RetriesExhausted { .. }
                | Error::OutOfDomain(_)
                | Error::DomainTooLarge { .. }
                | Error::NonFinite(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
