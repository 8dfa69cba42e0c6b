use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("alpha > 0 requires labels for both point sets")]
    MissingLabels,

    #[error("cost matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("invalid cost entry {value} at ({row}, {col})")]
    InvalidCost { row: usize, col: usize, value: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("undefined subset: group {group} has no rows")]
    UndefinedSubset { group: u8 },

    #[error("empty cell: group {group}, label {label}")]
    EmptyCell { group: u8, label: u8 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not symmetric positive definite")]
    NotSpd,

    #[error("matrix is singular")]
    Singular,

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: cannot parse `{value}`")]
    ParseCell { row: usize, column: String, value: String },

    #[error("unseen category `{value}` in column `{column}`")]
    UnseenCategory { column: String, value: String },

    #[error("schema: {0}")]
    Schema(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
