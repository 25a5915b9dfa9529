//! Reverse-mode autodiff with the neural building blocks used by the
//! vibration surrogate and the flow-based pattern generator: a dynamic tape,
//! dense/convolutional ops, a compact UNet, Adam and a binary checkpoint
//! format.

pub mod adam;
pub mod checkpoint;
mod conv;
pub mod embed;
pub mod error;
pub mod params;
pub mod tape;
pub mod unet;

pub use adam::{Adam, StepReport};
pub use error::NnError;
pub use params::{bind, BoundParams, Initializer, ParamStore};
pub use tape::{Grads, Tape, Var};
pub use unet::{UNet, UNetConfig};
