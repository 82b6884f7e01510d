use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = FraError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FraError {
    #[error("not a permutation of 1..={n}: {detail}")]
    InvalidPermutation { n: usize, detail: String },

    #[error("invalid Lehmer code at coordinate {coord}: value {value} exceeds {max}")]
    InvalidLehmerCode { coord: usize, value: usize, max: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("N = {n} exceeds the enumeration limit {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("recursive centroids disagree with enumeration at N = {n} (max abs diff {max_abs_diff:e})")]
    RecursionMismatch { n: usize, max_abs_diff: f64 },

    #[error("value {value} outside ring Z_{modulus} at coordinate {coord}")]
    OutOfRing { coord: usize, value: u64, modulus: u64 },

    #[error("corrupted aggregate: {0}")]
    CorruptedAggregate(String),

    #[error("malformed bitstream: {0}")]
    MalformedBitstream(String),

    #[error("{path}:{line}: {detail}")]
    Parse { path: PathBuf, line: usize, detail: String },

    #[error("client {client}: {source}")]
    Client {
        client: usize,
        #[source]
        source: Box<FraError>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl FraError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub(crate) fn in_client(self, client: usize) -> Self {
        Self::Client { client, source: Box::new(self) }
    }
}
