use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    /// All-zero velocity field: the level would be -inf.
    #[error("velocity field has zero mean square; level is non-finite")]
    NonFiniteLevel,

    #[error("fewer than two FRF samples inside [{lo} Hz, {hi} Hz]")]
    InsufficientResolution { lo: f64, hi: f64 },

    #[error("frequency range [{lo}, {hi}] invalid or not covered by FRF samples")]
    RangeNotCovered { lo: f64, hi: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid {what}: {why}")]
    Invalid { what: &'static str, why: String },

    #[error("{format} parse error: {why}")]
    Format { format: &'static str, why: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CoreError {
    pub fn invalid(what: &'static str, why: impl Into<String>) -> Self {
        CoreError::Invalid { what, why: why.into() }
    }
}
