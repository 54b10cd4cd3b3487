use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("missing parameter: {0}")]
    MissingParameter(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("parse error in field `{field}`: {message}")]
    Parse { field: String, message: String },
    #[error("structural error: {0}")]
    Structural(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
