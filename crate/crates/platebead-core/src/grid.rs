//! Row-major scalar and boolean grids.
//!
//! Rows run along the plate width (y), columns along the plate length (x).

use crate::error::CoreError;

/// Dense H x W grid of f64, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn zeros(h: usize, w: usize) -> Self {
        Grid { h, w, data: vec![0.0; h * w] }
    }

    pub fn from_vec(h: usize, w: usize, data: Vec<f64>) -> Result<Self, CoreError> {
        if data.len() != h * w {
            return Err(CoreError::DimensionMismatch { expected: h * w, got: data.len() });
        }
        Ok(Grid { h, w, data })
    }

    pub fn from_fn(h: usize, w: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut g = Grid::zeros(h, w);
        for r in 0..h {
            for c in 0..w {
                g.data[r * w + c] = f(r, c);
            }
        }
        g
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.w + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.w + c] = v;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Grid {
        Grid { h: self.h, w: self.w, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Flip rows (mirror along the x axis).
    pub fn flip_rows(&self) -> Grid {
        Grid::from_fn(self.h, self.w, |r, c| self.get(self.h - 1 - r, c))
    }

    /// Flip columns (mirror along the y axis).
    pub fn flip_cols(&self) -> Grid {
        Grid::from_fn(self.h, self.w, |r, c| self.get(r, self.w - 1 - c))
    }

    /// Bilinear sample at fractional grid coordinates (row, col), clamped to the
    /// grid. Coordinates are in pixel units with pixel centers at integers.
    pub fn sample_bilinear(&self, r: f64, c: f64) -> f64 {
        let r = r.clamp(0.0, (self.h - 1) as f64);
        let c = c.clamp(0.0, (self.w - 1) as f64);
        let r0 = r.floor() as usize;
        let c0 = c.floor() as usize;
        let r1 = (r0 + 1).min(self.h - 1);
        let c1 = (c0 + 1).min(self.w - 1);
        let fr = r - r0 as f64;
        let fc = c - c0 as f64;
        let v00 = self.get(r0, c0);
        let v01 = self.get(r0, c1);
        let v10 = self.get(r1, c0);
        let v11 = self.get(r1, c1);
        v00 * (1.0 - fr) * (1.0 - fc)
            + v01 * (1.0 - fr) * fc
            + v10 * fr * (1.0 - fc)
            + v11 * fr * fc
    }

    /// Resample onto a new H x W grid via bilinear interpolation of pixel centers,
    /// both grids covering the same physical rectangle.
    pub fn resample(&self, h: usize, w: usize) -> Grid {
        assert!(h >= 1 && w >= 1);
        Grid::from_fn(h, w, |r, c| {
            // map pixel center (r+0.5)/h of the target to source pixel coords
            let sr = (r as f64 + 0.5) / h as f64 * self.h as f64 - 0.5;
            let sc = (c as f64 + 0.5) / w as f64 * self.w as f64 - 0.5;
            self.sample_bilinear(sr, sc)
        })
    }
}

/// Dense H x W boolean mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub h: usize,
    pub w: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn filled(h: usize, w: usize, v: bool) -> Self {
        Mask { h, w, data: vec![v; h * w] }
    }

    pub fn from_fn(h: usize, w: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Mask::filled(h, w, false);
        for r in 0..h {
            for c in 0..w {
                m.data[r * w + c] = f(r, c);
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[r * self.w + c]
    }

    /// Value at possibly out-of-range indices, padded with `pad`.
    #[inline]
    pub fn get_padded(&self, r: isize, c: isize, pad: bool) -> bool {
        if r < 0 || c < 0 || r >= self.h as isize || c >= self.w as isize {
            pad
        } else {
            self.data[r as usize * self.w + c as usize]
        }
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        self.data[r * self.w + c] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn invert(&self) -> Mask {
        Mask { h: self.h, w: self.w, data: self.data.iter().map(|&b| !b).collect() }
    }

    pub fn union(&self, other: &Mask) -> Mask {
        assert_eq!((self.h, self.w), (other.h, other.w));
        Mask {
            h: self.h,
            w: self.w,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a || b).collect(),
        }
    }
}
