use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    /// `backward` is only defined for scalar outputs.
    #[error("backward called on a non-scalar value of {len} elements")]
    NonScalarLoss { len: usize },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
