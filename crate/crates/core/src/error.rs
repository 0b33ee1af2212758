//! Crate-wide error type.

use crate::domain::MatchingViolation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("invalid matching: {0}")]
    InvalidMatching(#[from] MatchingViolation),

    #[error("invalid transform: {0}")]
    InvalidTransform(String),

    #[error("invalid model config: {0}")]
    InvalidModelConfig(String),

    #[error("invalid substitution chain: {0}")]
    InvalidChain(String),

    #[error("invalid residue code {code} at position {position} (expected 1-20)")]
    InvalidResidue { code: i64, position: usize },

    #[error("sequence data required but absent: {0}")]
    MissingSequence(String),

    #[error("RMSD undefined for an empty matching")]
    EmptyMatching,

    #[error("quadrature grid built for ({expected_m}, {expected_n}) used with ({got_m}, {got_n})")]
    GridShapeMismatch {
        expected_m: usize,
        expected_n: usize,
        got_m: usize,
        got_n: usize,
    },

    #[error("enumeration size guard exceeded: {count} matchings for ({m}, {n}), limit {limit}")]
    EnumerationTooLarge {
        m: usize,
        n: usize,
        count: u128,
        limit: u128,
    },

    #[error("parse error in {path} line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{0}")]
    Pdb(String),

    #[error("empty sample stream")]
    EmptySamples,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
