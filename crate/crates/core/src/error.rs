use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch { left: String, right: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("spectral inversion left an imaginary residue of {residue:e} (scale {scale:e})")]
    ImaginaryResidue { residue: f64, scale: f64 },

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("f(0) = {value} but the source term must vanish at zero")]
    NonzeroAtOrigin { value: f64 },

    #[error("f({at}) evaluated to a non-finite value")]
    NonFiniteEvaluation { at: f64 },

    #[error("envelope evaluation overflowed at t = {at:e}")]
    EnvelopeOverflow { at: f64 },

    #[error("unknown builtin nonlinearity `{0}`")]
    UnknownBuiltin(String),

    #[error("no existence horizon: the (I1) integral does not converge ({0})")]
    NoHorizon(String),

    #[error("ordering violated at t = {t:e}, point {index}: {lhs:e} > {rhs:e} + slack")]
    OrderingViolation {
        t: f64,
        index: usize,
        lhs: f64,
        rhs: f64,
    },

    #[error("uniqueness is not guaranteed: (I2) is {0}")]
    UniquenessNotGuaranteed(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
