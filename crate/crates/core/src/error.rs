use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("numerical failure: {0}")]
    Computation(String),

    #[error("dangling reference: {kind} {key:?} not found")]
    DanglingReference { kind: &'static str, key: String },

    #[error("duplicate key: {kind} {key:?}")]
    DuplicateKey { kind: &'static str, key: String },

    #[error("selector hash mismatch: model was trained with {expected:#x}, vector built with {got:#x}")]
    SelectorMismatch { expected: u64, got: u64 },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn computation(msg: impl Into<String>) -> Self {
        Error::Computation(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
