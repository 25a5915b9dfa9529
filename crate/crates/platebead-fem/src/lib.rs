//! Shell finite-element harmonic analysis of beaded plates: structured mesh
//! with pattern-driven z-offsets, flat-facet triangular shell elements,
//! banded direct solves, frequency sweeps, eigenfrequencies and the
//! rotation-criterion field.

pub mod assemble;
pub mod banded;
pub mod eigen;
pub mod element;
pub mod error;
pub mod harmonic;
pub mod mesh;

pub use assemble::{assemble, assemble_free, FemSystem, DOFS_PER_NODE};
pub use eigen::lowest_eigenfrequencies;
pub use error::FemError;
pub use harmonic::{
    frequency_grid, harmonic_solve, peak_indices, rotation_field, solve_frf, velocity_magnitudes,
    SweepResult,
};
pub use mesh::{build_mesh, ShellMesh};

use platebead_core::types::{BeadingPattern, PlateConfig};

/// Mesh and assemble in one step.
pub fn build_system(
    cfg: &PlateConfig,
    pattern: &BeadingPattern,
    nx: usize,
    ny: usize,
) -> Result<FemSystem, FemError> {
    let mesh = build_mesh(cfg, pattern, nx, ny)?;
    assemble(&mesh, cfg)
}

/// System for the unbeaded plate.
pub fn flat_system(cfg: &PlateConfig, nx: usize, ny: usize) -> Result<FemSystem, FemError> {
    let pattern = BeadingPattern::flat(cfg, 8, 8);
    build_system(cfg, &pattern, nx, ny)
}

/// Analytic Kirchhoff eigenfrequency of the simply supported rectangular
/// plate, used as the oracle for the flat configuration.
pub fn kirchhoff_frequency(cfg: &PlateConfig, m: usize, n: usize) -> f64 {
    let d = cfg.youngs_modulus * cfg.thickness.powi(3)
        / (12.0 * (1.0 - cfg.poisson_ratio * cfg.poisson_ratio));
    let rho_h = cfg.density * cfg.thickness;
    let a = cfg.length;
    let b = cfg.width;
    std::f64::consts::FRAC_PI_2
        * (d / rho_h).sqrt()
        * ((m as f64 / a).powi(2) + (n as f64 / b).powi(2))
}
