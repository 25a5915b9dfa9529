//! Domain types and scalar formulas for beading-pattern vibration optimization.
//!
//! This crate holds the pieces every other crate builds on:
//! plate and pattern types, the velocity-level formulas, procedural
//! pattern generation, and the C1-C4 manufacturability machinery
//! (thresholding, morphology, edge masking, flank cross-section).

pub mod constraints;
pub mod error;
pub mod grid;
pub mod io;
pub mod level;
pub mod pattern;
pub mod types;

pub use constraints::{compliance, ComplianceReport, ConstraintParams, StructuringElement};
pub use error::CoreError;
pub use grid::{Grid, Mask};
pub use level::{level_from_field, mean_level};
pub use types::{BeadingPattern, FrequencyResponse, PlateConfig, VelocityField};
