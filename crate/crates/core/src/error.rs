use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid group specification: {0}")]
    InvalidSpec(String),

    #[error("generating set is not closed under inversion: {0}")]
    NonSymmetricGenerators(String),

    #[error("bad weights: {0}")]
    BadWeights(String),

    #[error("not a group: {0}")]
    NotAGroup(String),

    #[error("ball of radius {radius} exceeds the cap of {cap} elements")]
    BallTooLarge { radius: usize, cap: usize },

    #[error("exponent {0} is outside the admissible range")]
    BadExponent(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("support violation: {0}")]
    SupportViolation(String),

    #[error("zero functional has no norming vector")]
    ZeroFunctional,

    #[error("operation requires a finite group in full mode")]
    InfiniteGroup,

    #[error("invalid cocycle: {0}")]
    InvalidCocycle(String),

    #[error("energy vanishes: the point is fixed by the action")]
    AtFixedPoint,

    #[error("generating set or weights are not symmetric: {0}")]
    AsymmetricSetup(String),

    #[error("domain contains a nonzero invariant vector")]
    FixedVectorPresent,

    #[error("bad epsilon {0}: must lie in (0, 2]")]
    BadEpsilon(f64),

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
