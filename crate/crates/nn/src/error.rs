use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch in {layer}: expected {expected}, found {found}")]
    ShapeMismatch {
        layer: String,
        expected: String,
        found: String,
    },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid sequence lengths: {0}")]
    Lengths(String),
    #[error("backward called without a recorded training forward pass")]
    MissingForward,
    #[error("non-finite gradient for parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("label must be 0 or 1, got {0}")]
    InvalidLabel(f64),
    #[error("malformed model container at byte {offset}: {msg}")]
    Format { offset: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NnError>;

pub(crate) fn shape_err(layer: impl Into<String>, expected: impl Into<String>, found: impl Into<String>) -> NnError {
    NnError::ShapeMismatch {
        layer: layer.into(),
        expected: expected.into(),
        found: found.into(),
    }
}
