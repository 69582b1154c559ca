use std::io;

use thiserror::Error;

/// Errors produced anywhere in the imputation suite.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no rows in input table")]
    NoRows,

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: usize, message: String },

    #[error("value {value} in column {column} does not fit in {bits}-bit fixed point")]
    Overflow { column: usize, value: String, bits: u32 },

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("percentile interval selects no rows; re-seed the missingness generator")]
    EmptyInterval,

    #[error("nothing to impute")]
    NothingToImpute,

    #[error("{0}")]
    Config(String),

    #[error("cuckoo hashing failed after {attempts} rebuilds")]
    CuckooFailure { attempts: usize },

    #[error("bin {bin} holds {load} items, above the bound {bound}")]
    BinOverflow { bin: usize, load: usize, bound: usize },

    #[error("conflicting outputs programmed for the same input point")]
    ConflictingProgram,

    #[error("failed to decode a group element")]
    GroupDecode,

    #[error("multiplication triples exhausted")]
    TriplesExhausted,

    #[error("triple file: {0}")]
    TripleFile(String),

    #[error("peer disconnected")]
    Disconnected,

    #[error("timed out waiting for peer")]
    Timeout,

    #[error("frame of {0} bytes exceeds the frame limit")]
    FrameTooLarge(usize),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
