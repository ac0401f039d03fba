use thiserror::Error;

#[derive(Debug, Error)]
pub enum GformerError {
    #[error(transparent)]
    Tensor(#[from] tensor_core::TensorError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("image error: {0}")]
    Image(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("degradation error: {0}")]
    Degrade(String),
    #[error("evaluation error: {0}")]
    Eval(String),
    #[error("training error: {0}")]
    Train(String),
}

pub type Result<T> = std::result::Result<T, GformerError>;
