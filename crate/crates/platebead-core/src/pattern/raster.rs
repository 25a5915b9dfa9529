//! Geometric primitives and point-membership tests for rasterization.
//!
//! All coordinates and sizes are in meters on the plate rectangle
//! (x along the length, y along the width).

use crate::types::PlateConfig;

/// Number of segments used to approximate an ellipse outline.
const ELLIPSE_SEGMENTS: usize = 96;

/// A single beading primitive.
#[derive(Debug, Clone, PartialEq)]
pub enum PrimitiveSpec {
    /// Capsule: all points within width/2 of the segment (x0,y0)-(x1,y1).
    Line { x0: f64, y0: f64, x1: f64, y1: f64, width: f64 },
    /// Stroked full or partial ellipse outline.
    Ellipse {
        /// full axis length along the (unrotated) x direction
        len: f64,
        /// full axis length along the (unrotated) y direction
        wid: f64,
        cx: f64,
        cy: f64,
        line_width: f64,
        rotation: f64,
        full: bool,
        /// arc extent in radians when not full
        arc: f64,
    },
    /// Filled rectangle or stroked rectangle outline.
    Rectangle {
        len: f64,
        wid: f64,
        cx: f64,
        cy: f64,
        line_width: f64,
        rotation: f64,
        filled: bool,
    },
}

fn lerp(lo: f64, hi: f64, u: f64) -> f64 {
    lo + u * (hi - lo)
}

/// Distance from a point to a segment.
fn segment_distance(x: f64, y: f64, x0: f64, y0: f64, x1: f64, y1: f64) -> f64 {
    let (dx, dy) = (x1 - x0, y1 - y0);
    let len_sq = dx * dx + dy * dy;
    let t = if len_sq > 0.0 {
        (((x - x0) * dx + (y - y0) * dy) / len_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (px, py) = (x0 + t * dx, y0 + t * dy);
    ((x - px).powi(2) + (y - py).powi(2)).sqrt()
}

impl PrimitiveSpec {
    /// Line from 5 unit parameters [x0, y0, x1, y1, width].
    pub fn line_from_unit(u: &[f64], plate: &PlateConfig, l_min: f64) -> PrimitiveSpec {
        PrimitiveSpec::Line {
            x0: u[0] * plate.length,
            y0: u[1] * plate.width,
            x1: u[2] * plate.length,
            y1: u[3] * plate.width,
            width: lerp(l_min, 5.0 * l_min, u[4]),
        }
    }

    /// Ellipse from 8 unit parameters
    /// [len, wid, cx, cy, line width, rotation, full switch, arc angle].
    pub fn ellipse_from_unit(u: &[f64], plate: &PlateConfig, l_min: f64) -> PrimitiveSpec {
        PrimitiveSpec::Ellipse {
            len: lerp(l_min, 0.5 * plate.length, u[0]),
            wid: lerp(l_min, 0.5 * plate.width, u[1]),
            cx: u[2] * plate.length,
            cy: u[3] * plate.width,
            line_width: lerp(l_min, 5.0 * l_min, u[4]),
            rotation: u[5] * std::f64::consts::PI,
            full: u[6] >= 0.5,
            arc: lerp(std::f64::consts::FRAC_PI_4, 2.0 * std::f64::consts::PI, u[7]),
        }
    }

    /// Rectangle from 7 unit parameters
    /// [len, wid, cx, cy, line width, rotation, filled switch].
    pub fn rect_from_unit(u: &[f64], plate: &PlateConfig, l_min: f64) -> PrimitiveSpec {
        PrimitiveSpec::Rectangle {
            len: lerp(l_min, 0.5 * plate.length, u[0]),
            wid: lerp(l_min, 0.5 * plate.width, u[1]),
            cx: u[2] * plate.length,
            cy: u[3] * plate.width,
            line_width: lerp(l_min, 5.0 * l_min, u[4]),
            rotation: u[5] * std::f64::consts::PI,
            filled: u[6] >= 0.5,
        }
    }

    /// Point-membership test in meters.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            PrimitiveSpec::Line { x0, y0, x1, y1, width } => {
                segment_distance(x, y, x0, y0, x1, y1) <= width / 2.0
            }
            PrimitiveSpec::Ellipse { len, wid, cx, cy, line_width, rotation, full, arc } => {
                let a = len / 2.0;
                let b = wid / 2.0;
                let (sin_r, cos_r) = rotation.sin_cos();
                let span = if full { 2.0 * std::f64::consts::PI } else { arc };
                // stroked polyline along the (partial) ellipse boundary
                let point = |t: f64| {
                    let (st, ct) = t.sin_cos();
                    (cx + a * ct * cos_r - b * st * sin_r, cy + a * ct * sin_r + b * st * cos_r)
                };
                let half = line_width / 2.0;
                let n = ELLIPSE_SEGMENTS;
                let mut prev = point(0.0);
                for i in 1..=n {
                    let t = span * i as f64 / n as f64;
                    let cur = point(t);
                    if segment_distance(x, y, prev.0, prev.1, cur.0, cur.1) <= half {
                        return true;
                    }
                    prev = cur;
                }
                false
            }
            PrimitiveSpec::Rectangle { len, wid, cx, cy, line_width, rotation, filled } => {
                let (sin_r, cos_r) = rotation.sin_cos();
                let (dx, dy) = (x - cx, y - cy);
                // into the rectangle frame
                let u = dx * cos_r + dy * sin_r;
                let v = -dx * sin_r + dy * cos_r;
                let qx = u.abs() - len / 2.0;
                let qy = v.abs() - wid / 2.0;
                if filled {
                    qx <= 0.0 && qy <= 0.0
                } else {
                    // signed distance to the box boundary
                    let outside = (qx.max(0.0).powi(2) + qy.max(0.0).powi(2)).sqrt();
                    let inside = qx.max(qy).min(0.0);
                    (outside + inside).abs() <= line_width / 2.0
                }
            }
        }
    }
}
