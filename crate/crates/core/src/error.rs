use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The objective has no zero at a strictly positive location.
    #[error("no positive root: {0}")]
    NoPositiveRoot(String),

    /// A result that valid inputs cannot produce; indicates a bug.
    #[error("internal consistency failure: {0}")]
    Internal(String),

    /// A serialized report failed validation.
    #[error("invalid report: {0}")]
    Report(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
