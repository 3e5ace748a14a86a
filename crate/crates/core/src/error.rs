use thiserror::Error;

/// Errors produced by the simulation, optimization and experiment layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid qudit index {index} for a register of {num_qudits} qudits")]
    InvalidQudit { index: usize, num_qudits: usize },

    #[error("duplicate target qudit {0}")]
    DuplicateTarget(usize),

    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("unknown gate tag `{0}`")]
    UnknownGate(String),

    #[error("gate {0} requires an angle")]
    MissingAngle(String),

    #[error("gate {0} takes no angle")]
    UnexpectedAngle(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("label {0} is outside {{0, 1, 2}}")]
    InvalidLabel(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
