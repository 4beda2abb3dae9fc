use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("malformed summary {path}: {reason}")]
    MalformedSummary { path: String, reason: String },
    #[error(transparent)]
    Core(#[from] capi_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// Errors a user fixes by editing the configuration or command line.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            HarnessError::Config(_)
                | HarnessError::Core(capi_core::Error::UnknownGame(_))
                | HarnessError::Core(capi_core::Error::InvalidConfig(_))
                | HarnessError::Core(capi_core::Error::InvalidParameters(_))
        )
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
