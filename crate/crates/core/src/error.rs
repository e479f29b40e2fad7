use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("eigenvalue {index} did not converge within {sweeps} QL sweeps")]
    NonConvergence { index: usize, sweeps: usize },
    #[error("index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("matrix entry ({0}, {1}) is not finite")]
    NonFinite(usize, usize),
    #[error("matrix is not symmetric at ({0}, {1})")]
    Asymmetric(usize, usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid probability {name} = {value}")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("dimension {0} must be even")]
    OddDimension(usize),
    #[error("unknown ensemble `{0}`")]
    UnknownEnsemble(String),
    #[error("graph sample carries no planted labels")]
    MissingLabels,
    #[error("graph sample carries no {0} ensemble parameters")]
    MissingParams(&'static str),
    #[error("operation requires a discrete synchronization instance")]
    RequiresDiscreteInstance,
    #[error("entry {0} of the candidate is not a sign (+1/-1)")]
    NonSignVector(usize),
    #[error("row {row} sums to {sum}, not a Laplacian")]
    NonLaplacian { row: usize, sum: f64 },
    #[error("largest diagonal entry {0} is not positive")]
    NonPositiveDiagonalMax(f64),
    #[error("row sums of the variance profile are not equal (row {row}: {sum} vs {expected})")]
    UnequalRowSums { row: usize, sum: f64, expected: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidProbability { name, value })
    }
}
