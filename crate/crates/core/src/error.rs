use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the analytics pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("{path}: timestamps decrease at line {line} ({prev} > {cur})")]
    NonMonotone {
        path: PathBuf,
        line: u64,
        prev: i64,
        cur: i64,
    },

    #[error("invalid file name {0:?}: expected <STOCK>_<YYYYMMDD>.csv")]
    FileName(String),

    #[error("config: {0}")]
    Config(String),

    #[error("scenario: {0}")]
    Scenario(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("series too short: need {needed}, have {have}")]
    TooShort { needed: usize, have: usize },

    #[error("design is rank deficient: {0:?}")]
    RankDeficient(Vec<String>),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
