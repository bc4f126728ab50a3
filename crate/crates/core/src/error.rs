use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid config: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error("unknown stream tag `{0}`")]
    UnknownStreamTag(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("infeasible generator spec: {0}")]
    InfeasibleSpec(String),
    #[error("degenerate weights: every object has weight 1, effective sample is empty")]
    DegenerateWeights,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty {0} pool: cannot sample a bag (threshold collapsed)")]
    EmptyPool(&'static str),
    #[error("threshold {t} out of range [0, {n}]")]
    ThresholdOutOfRange { t: usize, n: usize },
    #[error("non-finite gradient at parameter {index}: {value}")]
    NonFiniteGradient { index: usize, value: f64 },
    #[error("AUC undefined: ground truth has a single class ({positives} positives, {negatives} negatives)")]
    UndefinedAuc { positives: usize, negatives: usize },
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("invalid resume state: {0}")]
    InvalidResume(String),
}
