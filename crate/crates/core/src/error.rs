use thiserror::Error;

/// Errors raised by problem construction, optimizers and the harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown configuration field `{0}`")]
    UnknownField(String),

    #[error("non-finite iterate at round {round}")]
    NonFinite { round: usize },

    #[error("dimension {dim} too small for {rounds} rounds: need d >= {required}, enlarge d")]
    DimensionTooSmall { dim: usize, rounds: usize, required: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("missing data: {0}")]
    Missing(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
