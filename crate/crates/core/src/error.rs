//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("missing resource file: {0}")]
    MissingResource(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// One-to-one alignment between utterances and coarse sequences broken.
    #[error("alignment mismatch at line {line}: {message}")]
    Alignment { line: usize, message: String },

    #[error("{0}")]
    InvalidInput(String),

    #[error("shape mismatch for {name}: expected {expected:?}, got {got:?}")]
    Shape {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration mismatch: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub fn alignment(line: usize, message: impl Into<String>) -> Self {
        Error::Alignment {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
