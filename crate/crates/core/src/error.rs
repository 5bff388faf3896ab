use thiserror::Error;

use crate::bits::BitString;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("interleave length mismatch: |Z| = {z}, |Y| = {y}")]
    LengthMismatch { z: usize, y: usize },
    #[error("not a hat prefix: block {block} at position {position}")]
    NotHatPrefix { block: String, position: usize },
    #[error("invalid bit character {0:?}")]
    InvalidBit(char),
    #[error("literal source exhausted at position {0}")]
    SourceExhausted(usize),
    #[error("malformed measure: {0}")]
    MalformedMeasure(String),
    #[error("inconsistent ball: {0}")]
    InconsistentBall(String),
    #[error("conditional undefined: mass of {0} is zero")]
    UndefinedConditional(BitString),
    #[error("zero-mass prefix {0} reached while sampling")]
    ZeroMassPrefix(BitString),
    #[error("invalid rational {0:?}")]
    InvalidRational(String),
    #[error("unknown index {0}")]
    UnknownIndex(u64),
    #[error("entry {index} has the wrong kind: expected {expected}")]
    WrongKind { index: u64, expected: &'static str },
    #[error("padding alias cycle at index {0}")]
    AliasCycle(u64),
    #[error("invalid weighted set: {0}")]
    InvalidWeightedSet(String),
    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },
    #[error("i/o error at {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
