use thiserror::Error;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("factorization breakdown at pivot {pivot}")]
    Breakdown { pivot: usize },
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("singular constrained system: {0}")]
    Singular(String),
    #[error("eigen iteration failed to converge after {iters} iterations")]
    EigenNoConvergence { iters: usize },
    #[error(transparent)]
    Core(#[from] platebead_core::CoreError),
}
