use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// The three data sources of a semi-supervised problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pool {
    Positive,
    Negative,
    Unlabeled,
}

impl fmt::Display for Pool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pool::Positive => "positive",
            Pool::Negative => "negative",
            Pool::Unlabeled => "unlabeled",
        })
    }
}

/// State captured when training produces a non-finite coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub iteration: usize,
    pub step_size: f64,
    /// First few `(index, value)` pairs of the offending coefficient vector.
    pub offending: Vec<(usize, f64)>,
    /// Model values at the batch points that produced the coefficient.
    pub batch_values: Vec<f64>,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "non-finite coefficient at iteration {} (step size {}): ",
            self.iteration, self.step_size
        )?;
        for (i, (idx, v)) in self.offending.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "alpha[{idx}]={v}")?;
        }
        Ok(())
    }
}

/// Errors raised while reading or writing a model file.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelFormatError {
    #[error("not a model file: expected header `{expected}`, found `{found}`")]
    BadMagic { expected: String, found: String },
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(String),
    #[error("missing header field `{0}`")]
    MissingField(&'static str),
    #[error("invalid value `{value}` for field `{field}`")]
    InvalidField { field: &'static str, value: String },
    #[error("truncated model: expected {expected} coefficient rows, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("coefficient row {row}: {reason}")]
    BadEntry { row: usize, reason: String },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("the {0} pool is empty")]
    EmptyPool(Pool),
    #[error("parse error at line {line}: {message} (token `{token}`)")]
    Parse {
        line: usize,
        token: String,
        message: String,
    },
    #[error("model format: {0}")]
    ModelFormat(#[from] ModelFormatError),
    #[error("training diverged: {0}")]
    Diverged(Box<Divergence>),
    #[error("labeled sample contains a single class after {attempts} attempts")]
    SingleClass { attempts: usize },
    #[error("exact solver refuses {n} points (cap {cap})")]
    OverCap { n: usize, cap: usize },
    #[error("step-size schedule outside the safe regime: {0}")]
    UnsafeSchedule(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}
