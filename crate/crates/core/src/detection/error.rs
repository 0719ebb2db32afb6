use thiserror::Error;

use crate::fock::FockError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectionError {
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("no detectors given")]
    NoDetectors,
    #[error("mode {mode} is watched by more than one detector")]
    DuplicateMode { mode: usize },
    #[error("detector {id}: efficiency {value} outside [0, 1]")]
    Efficiency { id: String, value: f64 },
    #[error("detector {id}: dark-count probability {value} outside [0, 1]")]
    DarkCount { id: String, value: f64 },
    #[error("detector {id} watches no modes")]
    NoModes { id: String },
    #[error("click pattern has {got} bits, expected {expected}")]
    PatternLength { expected: usize, got: usize },
    #[error("invalid click pattern {0:?}")]
    BadPattern(String),
    #[error("pattern {pattern} has probability {probability:e}; cannot condition on it")]
    ZeroProbability { pattern: String, probability: f64 },
    #[error("unknown detector {0}")]
    UnknownDetector(String),
    #[error("trials must be at least 1")]
    ZeroTrials,
    #[error("probabilities invalid: {0}")]
    InvalidProbabilities(String),
    #[error("data integrity: {0}")]
    Integrity(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("io: {0}")]
    Io(String),
}
