use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Io,
    Validation,
    Geometry,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad NIfTI magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("invalid NIfTI header: {0}")]
    InvalidHeader(String),
    #[error("unsupported NIfTI datatype code {0}")]
    UnsupportedDatatype(i16),
    #[error("expected a 3D volume, got {0} non-singleton dimensions")]
    DimensionCount(usize),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("singular affine (|det| = {0:e})")]
    SingularAffine(f64),
    #[error("ambiguous orientation: voxel axes {0} and {1} share a dominant world axis")]
    AmbiguousOrientation(usize, usize),
    #[error("volume shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch([usize; 3], [usize; 3]),
    #[error("volumes are not aligned (affines differ)")]
    Misaligned,
    #[error("data length {found} does not match dims {dims:?}")]
    DataLength { dims: [usize; 3], found: usize },
    #[error("zero variance under mask")]
    ZeroVariance,
    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },

    #[error("label {label} is outside the {taxonomy} taxonomy")]
    LabelOutOfRange { label: u32, taxonomy: &'static str },
    #[error("duplicate landmark id {0}")]
    DuplicateLandmark(u8),
    #[error("unknown landmark id {0}")]
    UnknownLandmark(i64),
    #[error("landmark {0} has a non-finite coordinate")]
    NonFiniteLandmark(u8),
    #[error("missing landmark #{id} ({name})")]
    MissingLandmark { id: u8, name: &'static str },
    #[error("malformed landmark file: {0}")]
    LandmarkFormat(String),

    #[error("midsagittal landmarks are collinear (triangle area {0:e} mm^2)")]
    CollinearLandmarks(f64),
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("zero total variance in training configurations")]
    ZeroTotalVariance,
    #[error("negative radius {0}")]
    NegativeRadius(f64),

    #[error("empty {0} surface")]
    EmptySurface(String),
    #[error("empty predicted set for {0}")]
    EmptyPrediction(String),
    #[error("no row contains both labels {0} and {1}")]
    NoSeparationLine(u16, u16),
    #[error("empty input")]
    EmptyInput,
    #[error("paired sample table: {0}")]
    PairedTable(String),

    #[error("phantom primitives overlap: label {0} collides with label {1}")]
    PhantomOverlap(u16, u16),
    #[error("phantom is not rule-consistent: {0}")]
    PhantomInconsistent(String),
    #[error("phantom primitive for label {0} leaves the volume")]
    PhantomOutOfBounds(u16),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            Io { .. }
            | BadMagic(_)
            | InvalidHeader(_)
            | UnsupportedDatatype(_)
            | DimensionCount(_)
            | TruncatedPayload { .. }
            | Json(_) => ErrorKind::Io,
            SingularAffine(_)
            | AmbiguousOrientation(..)
            | CollinearLandmarks(_)
            | ZeroVariance
            | ZeroTotalVariance
            | EmptySurface(_)
            | EmptyPrediction(_)
            | NoSeparationLine(..)
            | PhantomOverlap(..)
            | PhantomInconsistent(_)
            | PhantomOutOfBounds(_) => ErrorKind::Geometry,
            _ => ErrorKind::Validation,
        }
    }
}
