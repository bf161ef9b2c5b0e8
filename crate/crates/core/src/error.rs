use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the embedding pipeline.
#[derive(Debug, Error)]
pub enum FieError {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("index {index} out of range for {len} {what}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("node {node}: {source}")]
    Node {
        node: usize,
        #[source]
        source: Box<FieError>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("layer {layer}: {message}")]
    Layer { layer: usize, message: String },

    #[error("layer {layer}: {source}")]
    InLayer {
        layer: usize,
        #[source]
        source: Box<FieError>,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl FieError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        FieError::InvalidArgument(msg.into())
    }

    /// True when the error stems from a numerical failure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            FieError::NonFinite(_) => true,
            FieError::Node { source, .. } | FieError::InLayer { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, FieError>;
