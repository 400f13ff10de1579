use thiserror::Error;

pub type Result<T> = std::result::Result<T, ClotError>;

#[derive(Debug, Error)]
pub enum ClotError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("need at least {required} samples, got {actual}")]
    TooFewSamples { required: usize, actual: usize },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("kernel value {value} outside [0, {bound}]")]
    KernelOutOfBounds { value: f64, bound: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("asymptotic mode needs epsilon > 0; use permutation mode for epsilon = 0")]
    DegenerateNull,

    #[error("too few replicates: {0} (minimum 100)")]
    TooFewReplicates(usize),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("column `{0}` is not sensitive")]
    NotSensitive(String),

    #[error("invalid intervention on `{attribute}`: {reason}")]
    InvalidIntervention { attribute: String, reason: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("predictor failed: {0}")]
    Predictor(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("precondition violated: {0}")]
    Precondition(String),
}
