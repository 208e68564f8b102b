use thiserror::Error;

#[derive(Debug, Error)]
pub enum HeninError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("corpus parse error{}: {msg}", session_id.as_deref().map(|s| format!(" in session '{s}'")).unwrap_or_default())]
    Parse {
        session_id: Option<String>,
        msg: String,
    },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch for '{name}': expected {expected}, got {got}")]
    ShapeMismatch {
        name: String,
        expected: String,
        got: String,
    },

    #[error("unknown parameter '{0}'")]
    UnknownParameter(String),

    #[error("unknown session '{0}'")]
    UnknownSession(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}, step {step}: loss is not finite")]
    Diverged { epoch: usize, step: usize },

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("report emission failed: {0}")]
    Report(#[from] csv::Error),

    #[error("config error: {0}")]
    Config(String),
}
