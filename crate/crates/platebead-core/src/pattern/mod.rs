//! Procedural beading-pattern generation from geometric primitives, and the
//! fixed-length 43-parameter encoding used by the genetic baseline.

mod raster;

pub use raster::PrimitiveSpec;

use rand::Rng;

use crate::constraints::{self, ConstraintParams};
use crate::error::CoreError;
use crate::grid::Grid;
use crate::types::{BeadingPattern, PlateConfig};

/// Length of the parametric encoding: 2*(5+8+7) primitive slots + 3 counts.
pub const PARAM_COUNT: usize = 43;

const LINE_PARAMS: usize = 5;
const ELLIPSE_PARAMS: usize = 8;
const RECT_PARAMS: usize = 7;

/// Configuration of the random pattern generator.
#[derive(Debug, Clone)]
pub struct GenConfig {
    /// Maximum number of primitives per kind; the count is drawn uniformly
    /// from 0..=max.
    pub max_per_kind: usize,
    pub mirror_prob_x: f64,
    pub mirror_prob_y: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { max_per_kind: 2, mirror_prob_x: 0.5, mirror_prob_y: 0.5 }
    }
}

/// The grid resolution a pattern lives on, tied to a plate.
#[derive(Debug, Clone)]
pub struct PatternSpace {
    pub plate: PlateConfig,
    pub h: usize,
    pub w: usize,
}

impl PatternSpace {
    pub fn new(plate: PlateConfig, h: usize, w: usize) -> Self {
        PatternSpace { plate, h, w }
    }

    /// Desk-scale default: 48x72 pixels over the 0.6 x 0.9 m plate.
    pub fn desk(plate: PlateConfig) -> Self {
        PatternSpace::new(plate, 48, 72)
    }

    pub fn constraint_params(&self) -> ConstraintParams {
        ConstraintParams::from_plate(&self.plate)
    }

    fn flat(&self) -> BeadingPattern {
        BeadingPattern::flat(&self.plate, self.h, self.w)
    }
}

/// Draw a random pattern: random primitives, random mirroring, then the
/// C1-C4 postprocess so generated training data is compliant.
pub fn sample_pattern(rng: &mut impl Rng, space: &PatternSpace, cfg: &GenConfig) -> BeadingPattern {
    let raw = sample_pattern_raw(rng, space, cfg);
    constraints::postprocess(&raw, &space.constraint_params())
}

/// Random pattern before postprocessing (still raw primitive union).
pub fn sample_pattern_raw(
    rng: &mut impl Rng,
    space: &PatternSpace,
    cfg: &GenConfig,
) -> BeadingPattern {
    let mut specs = Vec::new();
    let kinds: [(usize, fn(&[f64], &PlateConfig, f64) -> PrimitiveSpec); 3] = [
        (LINE_PARAMS, PrimitiveSpec::line_from_unit),
        (ELLIPSE_PARAMS, PrimitiveSpec::ellipse_from_unit),
        (RECT_PARAMS, PrimitiveSpec::rect_from_unit),
    ];
    let l_min = space.constraint_params().l_min;
    for (nparams, build) in kinds {
        let count = rng.gen_range(0..=cfg.max_per_kind);
        for _ in 0..count {
            let unit: Vec<f64> = (0..nparams).map(|_| rng.gen::<f64>()).collect();
            specs.push(build(&unit, &space.plate, l_min));
        }
    }
    let mut pattern = rasterize(space, &specs);
    if rng.gen_bool(cfg.mirror_prob_x) {
        pattern.grid = pattern.grid.flip_rows();
    }
    if rng.gen_bool(cfg.mirror_prob_y) {
        pattern.grid = pattern.grid.flip_cols();
    }
    pattern
}

/// Decode the 43-parameter genetic encoding into a postprocessed pattern.
///
/// Layout: two line slots (5 each), two ellipse slots (8 each), two rectangle
/// slots (7 each), then three per-kind counts decoded as floor(3*v) clamped
/// to 2. All entries are expected in [0, 1] and are clamped to it.
pub fn decode_params(v: &[f64], space: &PatternSpace) -> Result<BeadingPattern, CoreError> {
    let raw = decode_params_raw(v, space)?;
    Ok(constraints::postprocess(&raw, &space.constraint_params()))
}

pub fn decode_params_raw(v: &[f64], space: &PatternSpace) -> Result<BeadingPattern, CoreError> {
    if v.len() != PARAM_COUNT {
        return Err(CoreError::DimensionMismatch { expected: PARAM_COUNT, got: v.len() });
    }
    let v: Vec<f64> = v.iter().map(|&x| x.clamp(0.0, 1.0)).collect();
    let counts: Vec<usize> =
        v[40..43].iter().map(|&x| ((3.0 * x).floor() as usize).min(2)).collect();
    let l_min = space.constraint_params().l_min;
    let mut specs = Vec::new();
    for slot in 0..counts[0] {
        let o = slot * LINE_PARAMS;
        specs.push(PrimitiveSpec::line_from_unit(&v[o..o + LINE_PARAMS], &space.plate, l_min));
    }
    for slot in 0..counts[1] {
        let o = 2 * LINE_PARAMS + slot * ELLIPSE_PARAMS;
        specs.push(PrimitiveSpec::ellipse_from_unit(
            &v[o..o + ELLIPSE_PARAMS],
            &space.plate,
            l_min,
        ));
    }
    for slot in 0..counts[2] {
        let o = 2 * (LINE_PARAMS + ELLIPSE_PARAMS) + slot * RECT_PARAMS;
        specs.push(PrimitiveSpec::rect_from_unit(&v[o..o + RECT_PARAMS], &space.plate, l_min));
    }
    Ok(rasterize(space, &specs))
}

/// Union of the rasterized primitives, clamped to 1.
pub fn rasterize(space: &PatternSpace, specs: &[PrimitiveSpec]) -> BeadingPattern {
    let mut pattern = space.flat();
    if specs.is_empty() {
        return pattern;
    }
    let (h, w) = (space.h, space.w);
    let px = pattern.pixel_pitch_x;
    let py = pattern.pixel_pitch_y;
    let mut grid = Grid::zeros(h, w);
    for r in 0..h {
        let y = (r as f64 + 0.5) * py;
        for c in 0..w {
            let x = (c as f64 + 0.5) * px;
            if specs.iter().any(|s| s.contains(x, y)) {
                grid.set(r, c, 1.0);
            }
        }
    }
    pattern.grid = grid;
    pattern
}
