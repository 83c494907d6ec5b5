use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum HbiError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unknown axis `{0}`")]
    Axis(String),
    #[error("grid covers only {coverage:.6} of the mass for input `{input}` (need {required})")]
    GridCoverage {
        input: String,
        coverage: f64,
        required: f64,
    },
    #[error("invalid supervision spec: {0}")]
    InvalidSpec(String),
    #[error("batch of {0} scores is too small for z-scoring (need at least 2)")]
    BatchTooSmall(usize),
    #[error("signal `{0}` is missing but carries nonzero weight")]
    MissingSignal(String),
    #[error("solver did not converge after {iterations} iterations (bracket [{lower}, {upper}])")]
    NonConvergence {
        iterations: usize,
        lower: f64,
        upper: f64,
    },
    #[error("invalid distortion matrix: {0}")]
    InvalidDistortion(String),
    #[error("normal equations are singular")]
    SingularSystem,
    #[error("training diverged at epoch {epoch} (loss trace tail {trace:?})")]
    Divergence { epoch: usize, trace: Vec<f64> },
    #[error("cannot evaluate on an empty pair list")]
    EmptyEval,
    #[error("channel has no merged (identical) rows")]
    NotNonInvertible,
    #[error("instance is empty")]
    EmptyInstance,
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("duplicate pair id `{id}` on line {line}")]
    DuplicateId { id: String, line: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("json: {0}")]
    Json(String),
}

impl From<std::io::Error> for HbiError {
    fn from(e: std::io::Error) -> Self {
        HbiError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for HbiError {
    fn from(e: serde_json::Error) -> Self {
        HbiError::Json(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, HbiError>;
