use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("image {width}x{height} is not divisible by the {cell}x{cell} pattern cell")]
    DimensionNotDivisible { width: usize, height: usize, cell: usize },
    #[error("mosaic phase ({0}, {1}) is not aligned to the pattern origin")]
    PhaseMismatch(usize, usize),
    #[error("band count mismatch: expected {expected}, found {found}")]
    BandCountMismatch { expected: usize, found: usize },
    #[error("patch origin or size ({x0}, {y0}, {w}, {h}) is not aligned to the {cell}-pixel pattern grid")]
    MisalignedPatch { x0: usize, y0: usize, w: usize, h: usize, cell: usize },
    #[error("region ({x0}, {y0}, {w}, {h}) lies outside the {width}x{height} image")]
    OutOfBounds { x0: usize, y0: usize, w: usize, h: usize, width: usize, height: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid pattern: {0}")]
    InvalidPattern(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("sigma must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("filter count must be 32 or 128, got {0}")]
    InvalidFilterCount(usize),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("checkpoint mismatch: {0}")]
    VersionMismatch(String),
    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(String),
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("shift capture set incomplete: {0}")]
    IncompleteSet(String),
    #[error("wavelengths are not strictly increasing")]
    NonMonotonicWavelengths,
    #[error("source {width}x{height} is smaller than the {patch}-pixel patch")]
    SourceTooSmall { width: usize, height: usize, patch: usize },
    #[error("insufficient area: {0}")]
    InsufficientArea(String),
    #[error("image {width}x{height} is smaller than the {window}-pixel SSIM window")]
    ImageTooSmall { width: usize, height: usize, window: usize },
    #[error("region mask selects no pixels")]
    EmptyRegion,
    #[error("wavelength {0} nm outside the colour-matching table")]
    WavelengthOutOfRange(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by numerical breakdown (NaN, divergence,
    /// singular systems) rather than malformed inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::NonFiniteGradient(_)
                | Error::NonFiniteLoss { .. }
                | Error::SingularMatrix
        )
    }
}
