use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite gradient in group `{group}` at flat index {index}")]
    NonFiniteGradient { group: String, index: usize },

    #[error("non-finite loss during {0}")]
    NonFiniteLoss(String),

    #[error("weight tracker holds no observations")]
    EmptyTracker,

    #[error("all particles dead on action dimension {dim}; cannot draw targets")]
    AllParticlesDead { dim: usize },

    #[error("resampling requires a particle head, got {0}")]
    NotAParticleHead(&'static str),

    #[error("resampling target ({dim},{target}) is itself dead")]
    DeadTarget { dim: usize, target: usize },

    #[error("environment fault at step {step}: {message}")]
    EnvironmentFault { step: usize, message: String },

    #[error("unknown environment `{0}`")]
    UnknownEnvironment(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error in section `{section}`: {message}")]
    Checkpoint { section: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
