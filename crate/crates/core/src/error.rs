use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, FarError>;

#[derive(Debug, Error)]
pub enum FarError {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("argument error: {0}")]
    Argument(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("scene spec error: {0}")]
    Spec(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl FarError {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        FarError::Shape(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        FarError::Format(msg.into())
    }
}
