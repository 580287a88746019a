use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("label column `{0}` not found in header")]
    UnknownLabelColumn(String),
    #[error("dataset has no feature names")]
    MissingFeatureNames,
    #[error("feature spaces share no feature names")]
    EmptyIntersection,
    #[error("class `{class}` has {available} samples, {requested} requested")]
    InsufficientSamples {
        class: String,
        available: usize,
        requested: usize,
    },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("empty {0} partition")]
    EmptyPartition(&'static str),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("bounding box ({xmin},{ymin},{xmax},{ymax}) is degenerate")]
    DegenerateBox {
        xmin: u32,
        ymin: u32,
        xmax: u32,
        ymax: u32,
    },
    #[error("bounding box ({xmin},{ymin},{xmax},{ymax}) exceeds {width}x{height} image")]
    BoxOutOfBounds {
        xmin: u32,
        ymin: u32,
        xmax: u32,
        ymax: u32,
        width: u32,
        height: u32,
    },
    #[error("image decode error for {path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("all pairwise distances are zero")]
    ZeroDistances,
    #[error("neighborhood size {k} must be smaller than the sample count {n}")]
    NeighborhoodTooLarge { k: usize, n: usize },
    #[error("vertex {0} is isolated (zero affinity row sum)")]
    IsolatedVertex(usize),
    #[error("eigensolver did not converge")]
    EigenNonConvergence,
    #[error("transfer requires both source and target samples")]
    EmptyDomain,
    #[error("non-finite objective at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },
    #[error("svm training needs both classes present")]
    SingleClass,
    #[error("svm did not converge after {iterations} iterations (duality gap {gap:.3e})")]
    SvmNonConvergence { iterations: usize, gap: f64 },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("missing domain tags: {0}")]
    MissingDomainTags(&'static str),
    #[error("class `{0}` has no target samples")]
    NoTargetSamples(String),
    #[error("empty reference set")]
    EmptyReferences,
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
