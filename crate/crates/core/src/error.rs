use thiserror::Error;

use crate::model::RequirementRow;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("input is not valid UTF-8: {0}")]
    Decode(#[from] std::str::Utf8Error),
    #[error("malformed document structure: {0}")]
    Structure(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("duplicate section numbers: {}", .collisions.join("; "))]
    Numbering { collisions: Vec<String> },
    /// External classification failed. `partial` holds every input row, in
    /// order, with labels filled in for the rows that were answered.
    #[error("classification failed: {message}")]
    Classification {
        message: String,
        partial: Box<Vec<RequirementRow>>,
    },
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("not found: {0}")]
    NotFound(String),
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),
    #[error("IO error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}
