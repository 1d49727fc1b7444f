use thiserror::Error;

/// Errors raised by estimators, factorizations and calculators.
///
/// The variants are grouped by who is at fault: `Structural`, `Precondition`
/// and `Domain` are caller input problems, `Resource` means a configured cap
/// was hit, and `Io`/`Parse` come from reading external data.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, lengths or parameters that do not fit together.
    #[error("structural error: {0}")]
    Structural(String),

    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A point or value lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A cover or tensor would exceed the configured size cap.
    #[error("resource cap exceeded: {what} needs {required} elements, cap is {cap}")]
    Resource {
        what: String,
        required: String,
        cap: u128,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
