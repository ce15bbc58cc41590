//! Crate-wide error type.
//!
//! Variants are grouped by failure class so the CLI can map each class to a
//! distinct exit code.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: bad hyperparameters, mismatched shapes,
    /// unknown problem ids, out-of-range arguments.
    #[error("configuration error: {0}")]
    Config(String),

    /// Filesystem problem (missing file, unwritable directory, short read).
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file exists but its contents violate the declared schema.
    #[error("schema violation in {path}: {detail}")]
    Schema { path: PathBuf, detail: String },

    /// Checkpoint and reference solution belong to different problems.
    #[error("problem mismatch: model was trained for '{model}', reference holds '{reference}'")]
    ProblemMismatch { model: String, reference: String },

    /// Numerical failure: non-finite values, divergence, or a convergence
    /// ladder that hit its resolution cap.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Misuse of the gradient tape (reverse pass on a rewound tape, unbound
    /// parameters).
    #[error("tape error: {0}")]
    Tape(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Exit code class for the CLI: each variant family has a stable value.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } => 3,
            Error::Schema { .. } => 4,
            Error::ProblemMismatch { .. } => 5,
            Error::Numerical(_) => 6,
            Error::Tape(_) => 7,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
