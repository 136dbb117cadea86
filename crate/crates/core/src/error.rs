use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in `{field}`")]
    NonFinite { field: &'static str },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("slip angle undefined for longitudinal speed {vx} m/s")]
    NonPositiveSpeed { vx: f64 },

    #[error("preview station {station:.3} m lies outside the trajectory domain [{start:.3}, {end:.3}]")]
    OutOfDomain { station: f64, start: f64, end: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("sample `{label}` has zero variance")]
    ZeroVariance { label: String },

    #[error("sample size {n} unsupported (expected {min}..={max})")]
    UnsupportedSize { n: usize, min: usize, max: usize },

    #[error("paired samples differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("simulation diverged at t = {time:.4} s: {reason}")]
    Divergence {
        time: f64,
        reason: String,
        /// Rows recorded before the divergence, in trace CSV layout.
        dump: Vec<String>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter { .. } => 2,
            Error::Divergence { .. } | Error::NonFinite { .. } => 3,
            Error::Io { .. } => 4,
            _ => 1,
        }
    }
}

pub(crate) fn ensure_finite(field: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { field })
    }
}

pub(crate) fn ensure_positive(field: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            field,
            reason: format!("must be finite and > 0, got {value}"),
        })
    }
}
