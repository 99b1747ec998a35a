use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point {index} duplicates point {other} (distance {distance:e})")]
    DuplicatePoint {
        index: usize,
        other: usize,
        distance: f64,
    },

    #[error("kernel matrix is singular even with jitter {jitter:e}; closest points {first} and {second} are {distance:e} apart")]
    SingularData {
        first: usize,
        second: usize,
        distance: f64,
        jitter: f64,
    },

    #[error("trust region does not intersect the domain")]
    InfeasibleRegion,

    #[error("objective returned {value} at {point:?}")]
    NonFiniteObjective { point: Vec<f64>, value: f64 },

    #[error("unknown benchmark `{name}`; valid names: {}", valid.join(", "))]
    UnknownBenchmark { name: String, valid: Vec<String> },

    #[error("ingestion error at row {row}: {message}")]
    Ingestion { row: usize, message: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
