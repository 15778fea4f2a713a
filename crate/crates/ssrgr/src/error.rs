use thiserror::Error;

/// Errors shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid labels: {0}")]
    InvalidLabels(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: String,
        expected: String,
        got: String,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// A point with no graph neighbors. Raising `num_neighbors` or removing
    /// duplicate points usually fixes this.
    #[error("degenerate graph: point {node} is isolated")]
    DegenerateGraph { node: usize },

    /// The label update system was numerically singular, which typically
    /// means the between-class weight overwhelms the other graph terms.
    #[error("label update system is near singular ({detail}); try a smaller beta3")]
    IndefiniteLaplacian { detail: String },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("column {index} has zero norm and cannot be normalized")]
    ZeroColumn { index: usize },

    #[error("parse error in {path} at line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
