//! Plate, pattern and response types shared by the whole toolkit.

use crate::error::CoreError;
use crate::grid::Grid;

/// Geometry, material, damping, boundary and load parameters of the plate.
///
/// Units are SI throughout; the flank angle is in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateConfig {
    pub length: f64,
    pub width: f64,
    pub thickness: f64,
    pub density: f64,
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub loss_factor: f64,
    /// Rotational boundary spring stiffness c_rx = c_ry, Nm/rad per boundary node.
    pub rot_stiffness: f64,
    pub load_x: f64,
    pub load_y: f64,
    pub bead_height: f64,
    pub flank_angle_deg: f64,
    pub foot_radius: f64,
    pub head_radius: f64,
}

impl PlateConfig {
    /// Aluminum plate of the benchmark model, free-rotation boundary.
    pub fn free_rotation() -> Self {
        PlateConfig {
            length: 0.9,
            width: 0.6,
            thickness: 0.003,
            density: 2700.0,
            youngs_modulus: 7.0e10,
            poisson_ratio: 0.3,
            loss_factor: 0.02,
            rot_stiffness: 0.0,
            load_x: 0.31,
            load_y: 0.21,
            bead_height: 0.02,
            flank_angle_deg: 70.0,
            foot_radius: 0.0095,
            head_radius: 0.0095,
        }
    }

    /// Stiff-spring approximation of a clamped boundary.
    pub fn clamped() -> Self {
        PlateConfig {
            rot_stiffness: 100.0,
            load_x: 0.52,
            load_y: 0.35,
            ..Self::free_rotation()
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if !(self.length > 0.0 && self.width > 0.0) {
            return Err(CoreError::invalid("plate", "length and width must be positive"));
        }
        if !(self.thickness > 0.0 && self.thickness < 0.1 * self.length.min(self.width)) {
            return Err(CoreError::invalid(
                "plate",
                "thickness must be positive and small against the in-plane dimensions",
            ));
        }
        if !(self.poisson_ratio >= 0.0 && self.poisson_ratio < 0.5) {
            return Err(CoreError::invalid("plate", "poisson_ratio must be in [0, 0.5)"));
        }
        if self.loss_factor < 0.0 || self.rot_stiffness < 0.0 {
            return Err(CoreError::invalid("plate", "loss_factor and rot_stiffness must be >= 0"));
        }
        let margin = 0.05;
        if self.load_x < margin
            || self.load_x > self.length - margin
            || self.load_y < margin
            || self.load_y > self.width - margin
        {
            return Err(CoreError::invalid(
                "plate",
                "load position must be >= 5 cm inside the plate boundary",
            ));
        }
        if self.density <= 0.0 || self.youngs_modulus <= 0.0 || self.bead_height < 0.0 {
            return Err(CoreError::invalid("plate", "material parameters must be positive"));
        }
        Ok(())
    }
}

/// Normalized height map over the plate rectangle, values in [0, 1].
///
/// Rows (H) span the plate width (y), columns (W) the plate length (x).
/// The physical elevation of a cell is `value * bead_height`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeadingPattern {
    pub grid: Grid,
    pub pixel_pitch_x: f64,
    pub pixel_pitch_y: f64,
}

impl BeadingPattern {
    /// Flat pattern covering a plate with the given pixel resolution.
    pub fn flat(cfg: &PlateConfig, h: usize, w: usize) -> Self {
        BeadingPattern {
            grid: Grid::zeros(h, w),
            pixel_pitch_x: cfg.length / w as f64,
            pixel_pitch_y: cfg.width / h as f64,
        }
    }

    pub fn new(grid: Grid, cfg: &PlateConfig) -> Self {
        let (h, w) = (grid.h, grid.w);
        BeadingPattern {
            grid,
            pixel_pitch_x: cfg.length / w as f64,
            pixel_pitch_y: cfg.width / h as f64,
        }
    }

    pub fn h(&self) -> usize {
        self.grid.h
    }

    pub fn w(&self) -> usize {
        self.grid.w
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.grid.data.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(CoreError::invalid("pattern", "cell values must lie in [0, 1]"));
        }
        if self.pixel_pitch_x <= 0.0 || self.pixel_pitch_y <= 0.0 {
            return Err(CoreError::invalid("pattern", "pixel pitch must be positive"));
        }
        Ok(())
    }

    /// Physical x coordinate of the center of column `c`.
    pub fn pixel_x(&self, c: usize) -> f64 {
        (c as f64 + 0.5) * self.pixel_pitch_x
    }

    /// Physical y coordinate of the center of row `r`.
    pub fn pixel_y(&self, r: usize) -> f64 {
        (r as f64 + 0.5) * self.pixel_pitch_y
    }
}

/// Per-node normal-velocity magnitudes at one excitation frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub frequency: f64,
    pub magnitudes: Vec<f64>,
}

impl VelocityField {
    pub fn new(frequency: f64, magnitudes: Vec<f64>) -> Result<Self, CoreError> {
        if magnitudes.is_empty() {
            return Err(CoreError::invalid("velocity field", "empty node set"));
        }
        if magnitudes.iter().any(|&m| m < 0.0 || !m.is_finite()) {
            return Err(CoreError::invalid("velocity field", "magnitudes must be finite and >= 0"));
        }
        Ok(VelocityField { frequency, magnitudes })
    }
}

/// Mean squared velocity level L_v over a set of frequencies, in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    pub frequencies: Vec<f64>,
    pub levels: Vec<f64>,
}

impl FrequencyResponse {
    pub fn new(frequencies: Vec<f64>, levels: Vec<f64>) -> Result<Self, CoreError> {
        if frequencies.len() != levels.len() {
            return Err(CoreError::DimensionMismatch {
                expected: frequencies.len(),
                got: levels.len(),
            });
        }
        if frequencies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CoreError::invalid("frf", "frequencies must be strictly increasing"));
        }
        Ok(FrequencyResponse { frequencies, levels })
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }
}
