use std::io;

use thiserror::Error;

use crate::dfz::DfzError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid camera configuration: {0}")]
    InvalidConfig(String),

    #[error("negative depth {0} m cannot be converted to phase")]
    NegativeDepth(f64),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("field has no valid rays")]
    NoValidRays,

    #[error("field phase is wrapped; unwrap it first or assert it fits the unambiguous range")]
    Wrapped,

    #[error("only {distinct} distinct depth values, need at least k = {k}")]
    TooFewDistinct { distinct: usize, k: usize },

    #[error("modulation block {block} is rank deficient (condition {condition:e}); use lambda > 0")]
    RankDeficient { block: usize, condition: f64 },

    #[error("calibration line: {0}")]
    CalibrationLine(String),

    #[error(transparent)]
    Dfz(#[from] DfzError),

    #[error("scene: {0}")]
    Scene(String),

    #[error("image export: {0}")]
    Image(#[from] image::ImageError),

    #[error("csv export: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for failures that come from the numerics rather than the data
    /// (rank deficiency, empty clusters and the like).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. } | Error::TooFewDistinct { .. } | Error::NoValidRays
        )
    }
}
