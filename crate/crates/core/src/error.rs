use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("partition has {cells} cells, above the cap of {cap}")]
    ResourceLimit { cells: u128, cap: u64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("scenario `{scenario}` is not a {expected} scenario")]
    WrongScenarioKind { scenario: String, expected: &'static str },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }
}
