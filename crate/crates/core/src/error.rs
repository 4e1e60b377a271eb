use std::io;

use thiserror::Error;

use crate::PointId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
    #[error("filter selects an empty region")]
    EmptyFilter,
    #[error("elastic factor is undefined: the searched cube union holds no points")]
    UndefinedElasticFactor,
    #[error("point {0} is already present")]
    DuplicateId(PointId),
    #[error("point {0} not found")]
    NotFound(PointId),
    #[error("corrupt index: {0}")]
    CorruptIndex(String),
    #[error("workload generation failed: {0}")]
    Generation(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn corrupt(msg: impl Into<String>) -> Self {
        Error::CorruptIndex(msg.into())
    }

    /// True for errors caused by bad input data rather than bad arguments.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidData(_)
                | Error::Format(_)
                | Error::CorruptIndex(_)
                | Error::Io(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}
