use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or layer shapes that cannot be combined.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A layer in a network rejected its input.
    #[error("layer {index}: {source}")]
    Layer {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// Invalid parameters or configuration, detected before any work is done.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Operation called in the wrong order (e.g. backward before forward).
    #[error("invalid state: {0}")]
    State(String),

    /// Labels or samples that violate a dataset contract.
    #[error("data error: {0}")]
    Data(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_layer(self, index: usize) -> Self {
        Error::Layer {
            index,
            source: Box::new(self),
        }
    }

    /// True for errors caused by invalid user input rather than a failure
    /// while running.
    pub fn is_usage(&self) -> bool {
        match self {
            Error::Config(_) | Error::Data(_) | Error::Domain(_) | Error::Json(_) => true,
            Error::Layer { source, .. } => source.is_usage(),
            _ => false,
        }
    }
}
