//! Manufacturability constraints C1-C4: measurement and enforcement.
//!
//! C1 edge margin, C2 bead height, C3 flank angle, C4 minimum length scale.
//! Enforcement works on the height map: threshold, clear the edge margin,
//! morphological opening/closing with a circular structuring element, then
//! rebuild elevations through the trapezoidal flank cross-section profile.

mod edt;
mod flank;
mod morph;

pub use flank::FlankProfile;
pub use morph::{close, dilate, erode, open, open_close, open_with_border, StructuringElement};

use crate::error::CoreError;
use crate::grid::{Grid, Mask};
use crate::types::{BeadingPattern, PlateConfig};

/// Geometric parameters the constraint checks need, derived from the plate.
#[derive(Debug, Clone)]
pub struct ConstraintParams {
    /// C4 minimum length scale, meters.
    pub l_min: f64,
    /// C1 minimum distance of beads from the plate edge, meters.
    pub edge_margin: f64,
    pub bead_height: f64,
    pub flank_angle_deg: f64,
    pub foot_radius: f64,
    pub head_radius: f64,
    pub binarize_threshold: f64,
}

impl ConstraintParams {
    pub fn from_plate(cfg: &PlateConfig) -> Self {
        ConstraintParams {
            l_min: 0.010,
            edge_margin: 0.010,
            bead_height: cfg.bead_height,
            flank_angle_deg: cfg.flank_angle_deg,
            foot_radius: cfg.foot_radius,
            head_radius: cfg.head_radius,
            binarize_threshold: 0.5,
        }
    }

    pub fn flank_profile(&self) -> FlankProfile {
        FlankProfile::new(
            self.bead_height,
            self.flank_angle_deg.to_radians(),
            self.foot_radius,
            self.head_radius,
        )
    }

    fn structuring_element(&self, pattern: &BeadingPattern) -> StructuringElement {
        let pitch = 0.5 * (pattern.pixel_pitch_x + pattern.pixel_pitch_y);
        StructuringElement::disc_diameter_px(self.l_min / pitch)
    }
}

/// Per-constraint violation masks plus the aggregate compliance ratio.
#[derive(Debug, Clone)]
pub struct ComplianceReport {
    pub c1: Mask,
    pub c2: Mask,
    pub c3: Mask,
    pub c4: Mask,
    /// 1 - |union of violating pixels| / (H*W)
    pub ratio: f64,
}

/// Cell true iff value >= threshold.
pub fn binarize(grid: &Grid, threshold: f64) -> Mask {
    Mask::from_fn(grid.h, grid.w, |r, c| grid.get(r, c) >= threshold)
}

/// C1-C3 violation masks.
///
/// C1: nonzero cells whose center lies closer than the edge margin to any edge.
/// C2: cells above the normalized height 1.
/// C3: neighbor pairs whose elevation slope exceeds tan(flank angle).
pub fn check_c1_c3(pattern: &BeadingPattern, params: &ConstraintParams) -> (Mask, Mask, Mask) {
    let g = &pattern.grid;
    let (h, w) = (g.h, g.w);
    let plate_x = pattern.pixel_pitch_x * w as f64;
    let plate_y = pattern.pixel_pitch_y * h as f64;
    let eps = 1e-9;

    let c1 = Mask::from_fn(h, w, |r, c| {
        if g.get(r, c) <= eps {
            return false;
        }
        let x = pattern.pixel_x(c);
        let y = pattern.pixel_y(r);
        let edge = x.min(plate_x - x).min(y).min(plate_y - y);
        edge < params.edge_margin - 1e-12
    });

    let c2 = Mask::from_fn(h, w, |r, c| g.get(r, c) > 1.0 + eps);

    let max_slope = params.flank_angle_deg.to_radians().tan() * (1.0 + 1e-9);
    let mut c3 = Mask::filled(h, w, false);
    for r in 0..h {
        for c in 0..w {
            let v = g.get(r, c) * params.bead_height;
            if c + 1 < w {
                let dv = (g.get(r, c + 1) * params.bead_height - v).abs();
                if dv / pattern.pixel_pitch_x > max_slope {
                    c3.set(r, c, true);
                    c3.set(r, c + 1, true);
                }
            }
            if r + 1 < h {
                let dv = (g.get(r + 1, c) * params.bead_height - v).abs();
                if dv / pattern.pixel_pitch_y > max_slope {
                    c3.set(r, c, true);
                    c3.set(r + 1, c, true);
                }
            }
        }
    }
    (c1, c2, c3)
}

/// C4 violation mask: a pixel is valid iff some translate of the l_min disc
/// contains it and lies entirely within pixels of the same phase. Out-of-grid
/// area counts as background (there is no bead beyond the plate).
pub fn check_c4(mask: &Mask, se: &StructuringElement) -> Mask {
    let fg_valid = open_with_border(mask, se, false);
    let bg = mask.invert();
    let bg_valid = open_with_border(&bg, se, true);
    Mask::from_fn(mask.h, mask.w, |r, c| {
        if mask.get(r, c) {
            !fg_valid.get(r, c)
        } else {
            !bg_valid.get(r, c)
        }
    })
}

/// Compliance of a pattern against C1-C4.
pub fn compliance(pattern: &BeadingPattern, params: &ConstraintParams) -> ComplianceReport {
    let (c1, c2, c3) = check_c1_c3(pattern, params);
    let mask = binarize(&pattern.grid, params.binarize_threshold);
    let se = params.structuring_element(pattern);
    let c4 = check_c4(&mask, &se);
    let mut violations = 0usize;
    for i in 0..mask.data.len() {
        if c1.data[i] || c2.data[i] || c3.data[i] || c4.data[i] {
            violations += 1;
        }
    }
    let ratio = 1.0 - violations as f64 / mask.data.len() as f64;
    ComplianceReport { c1, c2, c3, c4, ratio }
}

/// Full postprocess: binarize, clear the edge margin, open/close, rebuild the
/// elevation through the flank cross-section profile.
pub fn postprocess(pattern: &BeadingPattern, params: &ConstraintParams) -> BeadingPattern {
    postprocess_opts(pattern, params, true)
}

/// Postprocess with C4 (opening/closing) optionally disabled; the surrogate
/// training set deliberately skips C4.
pub fn postprocess_opts(
    pattern: &BeadingPattern,
    params: &ConstraintParams,
    enforce_c4: bool,
) -> BeadingPattern {
    let profile = params.flank_profile();
    let half_w = profile.half_width();
    let mut mask = binarize(&pattern.grid, params.binarize_threshold);

    // The flank straddles the mask boundary by half a flank width, so the mask
    // itself must stay that much further from the edge than the C1 margin.
    let clear = params.edge_margin + half_w;
    let plate_x = pattern.pixel_pitch_x * mask.w as f64;
    let plate_y = pattern.pixel_pitch_y * mask.h as f64;
    for r in 0..mask.h {
        for c in 0..mask.w {
            let x = pattern.pixel_x(c);
            let y = pattern.pixel_y(r);
            let edge = x.min(plate_x - x).min(y).min(plate_y - y);
            if edge < clear {
                mask.set(r, c, false);
            }
        }
    }

    if enforce_c4 {
        let se = params.structuring_element(pattern);
        mask = open_close(&mask, &se);
    }

    let grid = flank_elevation(&mask, pattern.pixel_pitch_x, pattern.pixel_pitch_y, &profile);
    BeadingPattern {
        grid,
        pixel_pitch_x: pattern.pixel_pitch_x,
        pixel_pitch_y: pattern.pixel_pitch_y,
    }
}

/// Elevation map from a binary bead mask: signed distance to the mask boundary
/// mapped through the flank profile, with the 0.5 crossing on the boundary.
pub fn flank_elevation(
    mask: &Mask,
    pitch_x: f64,
    pitch_y: f64,
    profile: &FlankProfile,
) -> Grid {
    let half_w = profile.half_width();
    let half_pitch = 0.25 * (pitch_x + pitch_y);
    let d_in = edt::distance_to(mask, false, pitch_x, pitch_y);
    let d_out = edt::distance_to(mask, true, pitch_x, pitch_y);
    Grid::from_fn(mask.h, mask.w, |r, c| {
        let phi = if mask.get(r, c) {
            d_in.get(r, c) - half_pitch
        } else {
            -(d_out.get(r, c) - half_pitch)
        };
        profile.normalized_height(half_w + phi)
    })
}

/// Convenience wrapper validating the input first.
pub fn postprocess_checked(
    pattern: &BeadingPattern,
    params: &ConstraintParams,
) -> Result<BeadingPattern, CoreError> {
    pattern.validate()?;
    Ok(postprocess(pattern, params))
}
