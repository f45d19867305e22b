use std::io;
use std::path::PathBuf;

use dra_core::DraError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("scenario schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Scenario(#[from] DraError),
}

impl GridError {
    pub(crate) fn parse(e: serde_json::Error) -> Self {
        GridError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Self {
        let path = path.into();
        move |source| GridError::Io { path, source }
    }
}
