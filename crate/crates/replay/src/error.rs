use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("corrupt recording entry '{entry}': {reason}")]
    Corrupt { entry: String, reason: String },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("class count mismatch: manifest says {manifest}, payload has {payload}")]
    ClassCountMismatch { manifest: usize, payload: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("fusion error: {0}")]
    Fusion(#[from] semfuse_core::FusionError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl ReplayError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        ReplayError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn corrupt(entry: impl Into<String>, reason: impl Into<String>) -> Self {
        ReplayError::Corrupt {
            entry: entry.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, ReplayError>;
