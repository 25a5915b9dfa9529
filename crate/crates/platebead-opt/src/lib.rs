//! Surrogate-assisted beading-pattern optimization: dataset generation, the
//! velocity-field surrogate, the flow-matching generator with guided ODE
//! sampling, the design objectives and the baseline optimizers with the
//! shared evaluation-budget protocol.

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod flow;
pub mod nfe;
pub mod objective;
pub mod surrogate;

pub use error::OptError;
pub use nfe::NfeCounter;
pub use objective::ObjectiveSpec;
