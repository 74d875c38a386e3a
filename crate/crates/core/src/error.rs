use std::path::PathBuf;

use thiserror::Error;

use crate::gpcm::CovStructure;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("row {row}, column `{column}`: cannot parse {value:?} as a finite number")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("label column `{0}` not found in header")]
    LabelColumnNotFound(String),

    #[error("input has no data rows")]
    NoRows,

    #[error("input has no feature columns")]
    NoColumns,

    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("column `{0}` is constant and cannot be standardized")]
    ConstantColumn(String),

    #[error("dataset has no labels")]
    MissingLabels,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unknown covariance structure `{0}`")]
    UnknownStructure(String),

    #[error("covariance structure {0} needs an MM algorithm and cannot be fitted")]
    UnfittableStructure(CovStructure),

    #[error("no fittable covariance structures requested")]
    NoStructures,

    #[error("component {component} has mass {mass:.3e}, below the empty-component threshold")]
    EmptyComponent { component: usize, mass: f64 },

    #[error("covariance of component {component} is singular after regularization")]
    SingularCovariance { component: usize },

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("need more observations than components (n = {n}, G = {g})")]
    TooFewObservations { n: usize, g: usize },

    #[error("log-likelihood became non-finite")]
    NonFiniteLikelihood,

    #[error("merge target count {h} exceeds source count {g}")]
    MergeTargetTooLarge { g: usize, h: usize },

    #[error("merge search over {count} candidates exceeds the limit of {limit}; narrow the window")]
    MergeSearchTooLarge { count: u128, limit: u128 },

    #[error("brute-force merge oracle refuses G = {0} (limit 8)")]
    OracleTooLarge(usize),

    #[error("partition has {found} clusters, expected {expected}")]
    ClusterCountMismatch { expected: usize, found: usize },

    #[error("need at least two observations, found {0}")]
    TooFewPairs(usize),

    #[error("every sweep cell failed")]
    AllCellsFailed,

    #[error("empty model window")]
    EmptyWindow,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
