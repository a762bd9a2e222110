use thiserror::Error;

/// Rejected configuration or malformed input data.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected} agents, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unknown tactic `{0}` (registered: {1})")]
    UnknownTactic(String, String),

    #[error("environment parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("non-square matrix: row {row} has {found} entries, expected {expected}")]
    NonSquare {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("entry at row {row}, column {col} is {value}, outside [0, 1]")]
    OutOfRange { row: usize, col: usize, value: f64 },

    #[error("diagonal entry at {0} must be 1")]
    Diagonal(usize),

    #[error("`{0}` must not be empty")]
    EmptyGrid(&'static str),
}

impl ConfigError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        ConfigError::InvalidParam {
            name,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContinuumError {
    #[error("degenerate input: loss ratio and peer accuracy are both zero")]
    Degenerate,

    #[error("step size {dt} is unstable; need dt < {bound}")]
    UnstableStep { dt: f64, bound: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("environment has no efficient links above the threshold")]
    DegenerateEnvironment,

    #[error("rate window must cover at least one tick")]
    EmptyWindow,
}

/// Errors surfaced by the experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
