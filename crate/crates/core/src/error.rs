use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit can report.
///
/// Variants are grouped by the layer that raises them; [`Error::kind`] maps
/// them onto the coarse categories the command-line front end turns into
/// exit codes.
#[derive(Debug, Error)]
pub enum Error {
    // domain validation
    #[error("shape mismatch: {what} has length {actual}, expected {expected}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("label {label} at row {row} is outside 0..{num_classes} (and is not -1)")]
    LabelOutOfRange {
        row: usize,
        label: i32,
        num_classes: usize,
    },
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },
    #[error("class {class} has no samples")]
    EmptyClass { class: usize },
    #[error("matrix must have at least one row and one column (got {rows}x{cols})")]
    EmptyMatrix { rows: usize, cols: usize },
    #[error("row {row} has zero norm")]
    ZeroRow { row: usize },
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("sample {row} is unlabeled but an evaluation label is required")]
    UnlabeledSample { row: usize },
    #[error("every centroid is stale; nothing to assign samples to")]
    AllCentroidsStale,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    // statistics
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("design matrix is rank deficient (condition estimate {condition:.3e})")]
    RankDeficient { condition: f64 },
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("interaction model needs both pretrain groups with at least two distinct top1 values")]
    MissingGroup,
    #[error("adjusted R^2 undefined: n = {n} must exceed df = {df}")]
    DegenerateDof { n: usize, df: usize },
    #[error("response has zero variance but the fit is not exact")]
    DegenerateVariance,
    #[error("cannot aggregate an empty collection")]
    Empty,

    // harness
    #[error("outcome for pair '{pair_id}' has no metadata key '{key}'")]
    MissingKey { pair_id: String, key: String },
    #[error("unknown method '{0}'")]
    UnknownMethod(String),

    // feature files
    #[error("bad magic bytes {0:?}, expected \"SFDK\"")]
    BadMagic([u8; 4]),
    #[error("unsupported SFDK version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated or oversized payload: expected {expected} bytes, found {actual}")]
    TruncatedPayload { expected: u64, actual: u64 },
    #[error("unknown flag bits {0:#x}")]
    UnknownFlags(u32),
    #[error("CSV header mismatch: {0}")]
    HeaderMismatch(String),
    #[error("CSV row {line} has {actual} fields, expected {expected}")]
    RaggedRow {
        line: usize,
        expected: usize,
        actual: usize,
    },
    #[error("CSV row {line}: cannot parse '{field}' as a number")]
    UnparsableNumber { line: usize, field: String },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse failure category.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Io,
    Validation,
    Degenerate,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidConfig(_) | Error::UnknownMethod(_) => ErrorKind::Config,
            Error::Io { .. } => ErrorKind::Io,
            Error::AllCentroidsStale | Error::ZeroRow { .. } | Error::ZeroVector => {
                ErrorKind::Degenerate
            }
            _ => ErrorKind::Validation,
        }
    }
}
