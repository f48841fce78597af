//! Error type shared across the simulator.

use thiserror::Error;

/// Errors produced by the simulator library.
#[derive(Debug, Error)]
pub enum FedError {
    /// Tensor/parameter dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An operation that needs data was handed an empty container.
    #[error("empty dataset")]
    EmptyDataset,

    /// A caller-supplied value is out of range or otherwise unusable.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A distributor cannot satisfy the requested assignment.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A file does not match its declared format.
    #[error("format error: {0}")]
    Format(String),

    /// A run configuration failed validation. `field` is the dotted path of
    /// the offending entry, e.g. `selector.cr`.
    #[error("invalid config at {field}: {message}")]
    Config { field: String, message: String },

    /// A checkpoint was produced under a different configuration.
    #[error("checkpoint digest mismatch: checkpoint {found:016x}, config {expected:016x}")]
    DigestMismatch { expected: u64, found: u64 },

    /// One or more clients failed during dispatch.
    #[error("dispatch failed for clients {ids:?}: {message}")]
    Dispatch { ids: Vec<usize>, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FedError>;
