//! Binary morphology with a circular structuring element.

use crate::grid::Mask;

/// Circular boolean structuring element given as center offsets.
#[derive(Debug, Clone)]
pub struct StructuringElement {
    pub offsets: Vec<(isize, isize)>,
    pub radius_px: f64,
}

impl StructuringElement {
    /// Disc of the given diameter in pixels. An offset (dr, dc) belongs to the
    /// disc iff dr^2 + dc^2 <= (d/2)^2. Always contains the center pixel.
    pub fn disc_diameter_px(diameter_px: f64) -> Self {
        let r = (diameter_px / 2.0).max(0.0);
        let ri = r.floor() as isize;
        let r2 = r * r + 1e-9;
        let mut offsets = Vec::new();
        for dr in -ri..=ri {
            for dc in -ri..=ri {
                if (dr * dr + dc * dc) as f64 <= r2 {
                    offsets.push((dr, dc));
                }
            }
        }
        if offsets.is_empty() {
            offsets.push((0, 0));
        }
        StructuringElement { offsets, radius_px: r }
    }
}

/// Erosion: pixel true iff every SE translate position is true (out-of-grid
/// positions take the `pad` phase).
pub fn erode(mask: &Mask, se: &StructuringElement, pad: bool) -> Mask {
    Mask::from_fn(mask.h, mask.w, |r, c| {
        se.offsets.iter().all(|&(dr, dc)| {
            mask.get_padded(r as isize + dr, c as isize + dc, pad)
        })
    })
}

/// Dilation: pixel true iff any SE translate position is true.
pub fn dilate(mask: &Mask, se: &StructuringElement, pad: bool) -> Mask {
    Mask::from_fn(mask.h, mask.w, |r, c| {
        se.offsets.iter().any(|&(dr, dc)| {
            mask.get_padded(r as isize + dr, c as isize + dc, pad)
        })
    })
}

pub fn open(mask: &Mask, se: &StructuringElement, pad: bool) -> Mask {
    dilate(&erode(mask, se, pad), se, pad)
}

pub fn close(mask: &Mask, se: &StructuringElement, pad: bool) -> Mask {
    erode(&dilate(mask, se, pad), se, pad)
}

/// Opening followed by closing, background-phase padding: removes features
/// narrower than the SE and fills gaps narrower than the SE.
pub fn open_close(mask: &Mask, se: &StructuringElement) -> Mask {
    close(&open(mask, se, false), se, false)
}

/// Opening on the mask extended by one SE radius of `border` pixels, so disc
/// centers just outside the grid are handled exactly: such a center is valid
/// only if its in-grid pixels match, not unconditionally as plain `pad` would
/// make it.
pub fn open_with_border(mask: &Mask, se: &StructuringElement, border: bool) -> Mask {
    let m = se.radius_px.ceil() as usize + 1;
    let padded = Mask::from_fn(mask.h + 2 * m, mask.w + 2 * m, |r, c| {
        if (m..m + mask.h).contains(&r) && (m..m + mask.w).contains(&c) {
            mask.get(r - m, c - m)
        } else {
            border
        }
    });
    let opened = open(&padded, se, border);
    Mask::from_fn(mask.h, mask.w, |r, c| opened.get(r + m, c + m))
}
