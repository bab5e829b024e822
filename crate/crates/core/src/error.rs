use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("chain seed violates the target indicators (performance {performance}, threshold {threshold})")]
    SeedOutsideTarget { performance: f64, threshold: f64 },

    #[error("c.o.v. undefined: {0}")]
    UndefinedCov(String),

    #[error("no qualifying samples to seed conditional chains")]
    NoQualifyingSamples,

    #[error("unknown benchmark `{name}`; available: {available}")]
    UnknownBenchmark { name: String, available: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),
}
