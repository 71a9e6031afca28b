use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the selection engine.
///
/// Every variant maps to a stable, machine-readable name via [`Error::name`],
/// which the command-line front end prints on failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Format(String),
    #[error("dataset contains no samples")]
    EmptyDataset,
    #[error("index {0} is missing")]
    MissingIndex(usize),
    #[error("index {0} appears more than once")]
    DuplicateIndex(usize),
    #[error("row {0} has zero norm")]
    ZeroVector(usize),
    #[error("k = {k} is out of range for n = {n} (need 1 <= k <= n - 1)")]
    InvalidK { k: usize, n: usize },
    #[error("node {0} has zero weighted degree")]
    IsolatedNode(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("least common ancestor requested for identical nodes ({0})")]
    SameNode(usize),
    #[error("tree does not match graph: {0}")]
    TreeGraphMismatch(String),
    #[error("brute-force Shapley limited to n <= {limit}, got n = {n}")]
    TooLarge { n: usize, limit: usize },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("cutoff ratio beta = {0} outside [-1, 1]")]
    InvalidBeta(f64),
    #[error("budget m = {budget} cannot be met from a candidate pool of {pool}")]
    InfeasibleBudget { budget: usize, pool: usize },
    #[error("memory capacity {capacity} is smaller than the required {required}")]
    CapacityTooSmall { capacity: usize, required: usize },
    #[error("no pair of slots can be merged")]
    NoMergeablePair,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    /// Stable identifier for the error kind.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Io { .. } => "IoError",
            Error::Format(_) => "FormatError",
            Error::EmptyDataset => "EmptyDataset",
            Error::MissingIndex(_) => "MissingIndex",
            Error::DuplicateIndex(_) => "DuplicateIndex",
            Error::ZeroVector(_) => "ZeroVector",
            Error::InvalidK { .. } => "InvalidK",
            Error::IsolatedNode(_) => "IsolatedNode",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::SameNode(_) => "SameNode",
            Error::TreeGraphMismatch(_) => "TreeGraphMismatch",
            Error::TooLarge { .. } => "TooLarge",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::InvalidBeta(_) => "InvalidBeta",
            Error::InfeasibleBudget { .. } => "InfeasibleBudget",
            Error::CapacityTooSmall { .. } => "CapacityTooSmall",
            Error::NoMergeablePair => "NoMergeablePair",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
