use thiserror::Error;

/// Errors raised by the solver, the environment builders and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("mode mismatch: {0}")]
    ModeMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("depth {requested} exceeds tree depth {depth}")]
    DepthOutOfRange { requested: usize, depth: usize },

    #[error(
        "scenario tree would have {nodes} nodes, above the limit of {limit}; \
         use a shorter horizon or a smaller noise alphabet"
    )]
    TreeTooLarge { nodes: usize, limit: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("rate fit needs at least 5 usable points, got {0}")]
    InsufficientTrace(usize),

    #[error("linear system is singular")]
    Singular,

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
