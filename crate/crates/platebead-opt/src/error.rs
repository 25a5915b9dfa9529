use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptError {
    #[error(transparent)]
    Core(#[from] platebead_core::error::CoreError),
    #[error(transparent)]
    Fem(#[from] platebead_fem::FemError),
    #[error(transparent)]
    Nn(#[from] platebead_nn::NnError),
    #[error("dataset error: {0}")]
    Dataset(String),
    /// First-eigenfrequency objective needs at least two detected peaks.
    #[error("objective undefined: {0}")]
    ObjectiveUndefined(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
