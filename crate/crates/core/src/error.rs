use thiserror::Error;

use crate::fosg::ObsCode;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid game description: {0}")]
    InvalidGame(String),
    #[error("a history exceeds the declared horizon of {horizon} joint actions")]
    HorizonExceeded { horizon: usize },
    #[error("{what} exceeds the configured cap of {cap}")]
    CapExceeded { what: &'static str, cap: u64 },
    #[error("unknown game `{0}`")]
    UnknownGame(String),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("belief has an empty support")]
    EmptySupport,
    #[error("prescription does not match the belief's public state: {0}")]
    PrescriptionMismatch(String),
    #[error("public observation {0} has zero probability")]
    ZeroProbabilityObservation(ObsCode),
    #[error("belief is terminal")]
    TerminalBelief,
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed data: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
