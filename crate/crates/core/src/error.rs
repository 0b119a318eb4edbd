use thiserror::Error;

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("sensor {sensor} coincides with the evaluation point")]
    DegenerateGeometry { sensor: usize },

    #[error("degenerate scene: {0}")]
    DegenerateScene(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("enumeration refused: {subsets} subsets x {per_subset} evaluations exceeds cap {cap}")]
    EnumerationCap {
        subsets: u128,
        per_subset: u64,
        cap: u128,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, SelectError>;
