use thiserror::Error;

/// Errors produced by the wrapper adaptation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot ingest document: {0}")]
    Ingest(String),

    #[error("unsupported XPath dialect at `{token}`: {reason}")]
    UnsupportedXPath { token: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cannot sign: `{0}` selects no nodes")]
    CannotSign(String),

    #[error("unknown signature version {0}")]
    UnknownVersion(u64),

    #[error("signature load error: {0}")]
    SignatureLoad(String),

    #[error("oracle refuses trees with more than {limit} nodes (got {got})")]
    OracleTooLarge { limit: usize, got: usize },

    #[error("mutation spec error: {0}")]
    MutationSpec(String),

    #[error("corpus error: {0}")]
    Corpus(String),

    #[error("invalid threshold `{0}`: expected a value in [0, 1]")]
    Threshold(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
