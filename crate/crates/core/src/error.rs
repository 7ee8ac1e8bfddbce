// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("index {index} out of range for cloud of {len} points")]
    IndexError { index: usize, len: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("schema error: {0}")]
    SchemaError(String),
    #[error("parse error at row {row}: {message}")]
    ParseError { row: usize, message: String },
    #[error("malformed LAS file: {0}")]
    FormatError(String),
    #[error("unsupported LAS point format {0}")]
    UnsupportedFormat(u8),
    #[error("rank-deficient design: (x, y) locations are collinear or coincident")]
    RankDeficient,
    #[error("too few points: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("degenerate ground set: {0}")]
    DegenerateGroundSet(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("degenerate features: {0}")]
    DegenerateFeatures(String),
    #[error("input mismatch: {0}")]
    InputMismatch(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
