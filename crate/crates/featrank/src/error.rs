//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Dimension or length mismatch between operands.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A configuration value violates its invariants.
    #[error("invalid config: {0}")]
    Config(String),

    /// A data file could not be parsed. `location` is a byte offset for
    /// binary formats and a line number for text formats.
    #[error("parse error in {path} at {location}: {message}")]
    Parse {
        path: String,
        location: String,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}: {message}")]
    Divergence { epoch: usize, message: String },
}

impl Error {
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
