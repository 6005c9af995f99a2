use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported PGM variant: magic {0:?}")]
    UnsupportedPgmVariant(String),
    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),
    #[error("unsupported PGM maxval {0} (only 255 is accepted)")]
    UnsupportedMaxval(u32),
    #[error("truncated pixel data: expected {expected} bytes, found {found}")]
    TruncatedPixels { expected: usize, found: usize },
    #[error("intensity {value} at pixel index {index} is outside [0, 255]")]
    IntensityOutOfRange { index: usize, value: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid raster: {0}")]
    InvalidRaster(String),
    #[error("degenerate histogram: image is constant")]
    DegenerateHistogram,
    #[error("no head region found")]
    NoHeadRegion,
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("histogram bin counts differ ({0} vs {1})")]
    BinCountMismatch(usize, usize),
    #[error("empty histogram operand")]
    EmptyHistogram,
    #[error("empty mask")]
    EmptyMask,
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("training did not converge within {passes} pair updates (max KKT violation {violation:e})")]
    NotConverged { passes: usize, violation: f64 },
    #[error("invalid phantom spec field {field}: {reason}")]
    InvalidPhantom { field: &'static str, reason: String },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
