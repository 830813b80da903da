use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scene spec at {field}: {reason}")]
    InvalidSpec { field: String, reason: String },

    #[error("fusion error: {0}")]
    Fusion(#[from] semfuse_core::FusionError),

    #[error("replay error: {0}")]
    Replay(#[from] semfuse_replay::ReplayError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl SimError {
    pub fn spec(field: impl Into<String>, reason: impl Into<String>) -> Self {
        SimError::InvalidSpec {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
