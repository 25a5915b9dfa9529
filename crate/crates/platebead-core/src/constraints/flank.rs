//! Trapezoidal bead cross-section: circular foot blend, linear flank at the
//! flank angle, circular head blend, flat top.

/// One-dimensional elevation profile of the bead flank.
///
/// `height(d)` is the elevation (meters) at distance `d` from the flank start
/// (where the bead begins to rise). The profile is monotone, 0 for d <= 0 and
/// `bead_height` for d >= `width()`.
#[derive(Debug, Clone)]
pub struct FlankProfile {
    bead_height: f64,
    foot_radius: f64,
    head_radius: f64,
    /// horizontal extent of the foot arc
    x_foot: f64,
    /// horizontal extent of the linear flank segment
    x_lin: f64,
    /// horizontal extent of the head arc
    x_head: f64,
    /// height climbed by the foot arc
    h_foot: f64,
    slope: f64,
    half_width: f64,
}

impl FlankProfile {
    pub fn new(bead_height: f64, flank_angle_rad: f64, foot_radius: f64, head_radius: f64) -> Self {
        assert!(bead_height >= 0.0 && flank_angle_rad > 0.0 && flank_angle_rad < std::f64::consts::FRAC_PI_2);
        let (sin_a, cos_a) = flank_angle_rad.sin_cos();
        let slope = flank_angle_rad.tan();
        // shrink the blend radii proportionally if they would not fit the height
        let climb = (foot_radius + head_radius) * (1.0 - cos_a);
        let scale = if climb > bead_height && climb > 0.0 { bead_height / climb } else { 1.0 };
        let rf = foot_radius * scale;
        let rh = head_radius * scale;
        let h_foot = rf * (1.0 - cos_a);
        let h_head = rh * (1.0 - cos_a);
        let x_foot = rf * sin_a;
        let x_head = rh * sin_a;
        let x_lin = ((bead_height - h_foot - h_head) / slope).max(0.0);
        let mut p = FlankProfile {
            bead_height,
            foot_radius: rf,
            head_radius: rh,
            x_foot,
            x_lin,
            x_head,
            h_foot,
            slope,
            half_width: 0.0,
        };
        p.half_width = p.solve_half();
        p
    }

    /// Total horizontal width of the flank.
    pub fn width(&self) -> f64 {
        self.x_foot + self.x_lin + self.x_head
    }

    /// Distance at which the profile crosses half the bead height.
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Elevation in meters at distance d from the flank start.
    pub fn height(&self, d: f64) -> f64 {
        if self.bead_height == 0.0 {
            return 0.0;
        }
        let w = self.width();
        if d <= 0.0 {
            0.0
        } else if d < self.x_foot {
            let rf = self.foot_radius;
            rf - (rf * rf - d * d).sqrt()
        } else if d < self.x_foot + self.x_lin {
            self.h_foot + self.slope * (d - self.x_foot)
        } else if d < w {
            let rh = self.head_radius;
            let dd = w - d;
            self.bead_height - (rh - (rh * rh - dd * dd).max(0.0).sqrt())
        } else {
            self.bead_height
        }
    }

    /// Elevation normalized to [0, 1].
    pub fn normalized_height(&self, d: f64) -> f64 {
        if self.bead_height == 0.0 {
            0.0
        } else {
            (self.height(d) / self.bead_height).clamp(0.0, 1.0)
        }
    }

    fn solve_half(&self) -> f64 {
        if self.bead_height == 0.0 {
            return 0.0;
        }
        let target = 0.5 * self.bead_height;
        let (mut lo, mut hi) = (0.0, self.width());
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.height(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}
