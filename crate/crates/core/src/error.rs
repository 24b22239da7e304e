use thiserror::Error;

/// Errors raised across the simulation, learning and evaluation stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("bearing is undefined for coincident points")]
    CoincidentPoints,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("forward cache does not match this network: {0}")]
    StaleCache(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("no goal has been observed yet")]
    NoGoal,

    #[error("replay buffer holds {have} transitions, batch needs {need}")]
    EmptyBuffer { have: usize, need: usize },

    #[error("start-pose sampler failed after {0} attempts")]
    SamplerExhausted(usize),

    #[error("malformed run log at row {row}: {msg}")]
    RunLog { row: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by user-supplied configuration or input files.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Json(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
