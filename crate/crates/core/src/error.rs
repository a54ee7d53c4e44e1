use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid shape: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible acceleration R = {requested}: minimal feasible R is {minimal:.4}")]
    InfeasibleAcceleration { requested: f64, minimal: f64 },

    #[error("zero-norm coil sensitivity vector at pixel ({row}, {col})")]
    ZeroSensitivity { row: usize, col: usize },

    #[error("sampling probability is zero at sampled k-space location {index}")]
    ZeroDensity { index: usize },

    #[error("Onsager denominator degenerate in band {band} (alpha = {alpha})")]
    OnsagerDegenerate { band: usize, alpha: f64 },

    #[error("array file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::OnsagerDegenerate { .. } | Error::NonFinite(_))
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
