//! Exact Euclidean distance transform (Felzenszwalb & Huttenlocher two-pass),
//! with anisotropic pixel pitch.

use crate::grid::{Grid, Mask};

const INF: f64 = 1e30;

/// Squared-distance lower envelope of parabolas f(p) + s*(x-p)^2 along one line.
/// Absent pixels carry the finite sentinel `INF`, which f64 addition absorbs,
/// so no special cases are needed.
fn dt_1d(f: &[f64], s: f64, out: &mut [f64]) {
    let n = f.len();
    debug_assert!(n > 0);
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let fq = f[q] + s * (q * q) as f64;
        let inter = loop {
            let p = v[k];
            let inter = (fq - (f[p] + s * (p * p) as f64)) / (2.0 * s * (q as f64 - p as f64));
            if inter <= z[k] {
                k -= 1;
            } else {
                break inter;
            }
        };
        k += 1;
        v[k] = q;
        z[k] = inter;
        z[k + 1] = f64::INFINITY;
    }
    let mut k = 0usize;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as f64 - p as f64;
        out[q] = f[p] + s * d * d;
    }
}

/// Euclidean distance (meters) from each pixel center to the nearest pixel
/// center of the given phase. Pixels of that phase have distance 0. If no
/// pixel of the phase exists, distances are a large sentinel.
pub fn distance_to(mask: &Mask, phase: bool, pitch_x: f64, pitch_y: f64) -> Grid {
    let (h, w) = (mask.h, mask.w);
    let mut sq = vec![0.0f64; h * w];
    for i in 0..h * w {
        sq[i] = if mask.data[i] == phase { 0.0 } else { INF };
    }
    // columns (y direction)
    let sy = pitch_y * pitch_y;
    let mut col = vec![0.0; h];
    let mut out_col = vec![0.0; h];
    for c in 0..w {
        for r in 0..h {
            col[r] = sq[r * w + c];
        }
        dt_1d(&col, sy, &mut out_col);
        for r in 0..h {
            sq[r * w + c] = out_col[r];
        }
    }
    // rows (x direction)
    let sx = pitch_x * pitch_x;
    let mut out_row = vec![0.0; w];
    for r in 0..h {
        dt_1d(&sq[r * w..(r + 1) * w].to_vec(), sx, &mut out_row);
        sq[r * w..(r + 1) * w].copy_from_slice(&out_row);
    }
    Grid {
        h,
        w,
        data: sq.iter().map(|&d| if d >= 1e29 { INF } else { d.sqrt() }).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force oracle.
    fn brute(mask: &Mask, phase: bool, px: f64, py: f64) -> Grid {
        Grid::from_fn(mask.h, mask.w, |r, c| {
            let mut best = INF;
            for rr in 0..mask.h {
                for cc in 0..mask.w {
                    if mask.get(rr, cc) == phase {
                        let dx = (cc as f64 - c as f64) * px;
                        let dy = (rr as f64 - r as f64) * py;
                        best = best.min((dx * dx + dy * dy).sqrt());
                    }
                }
            }
            best
        })
    }

    #[test]
    fn matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let h = rng.gen_range(1..14);
            let w = rng.gen_range(1..14);
            let mask = Mask::from_fn(h, w, |_, _| rng.gen_bool(0.4));
            for (px, py) in [(1.0, 1.0), (0.5, 2.0)] {
                let fast = distance_to(&mask, true, px, py);
                let slow = brute(&mask, true, px, py);
                for i in 0..h * w {
                    let (a, b) = (fast.data[i], slow.data[i]);
                    if b >= INF {
                        assert!(a >= INF);
                    } else {
                        assert!((a - b).abs() < 1e-9, "mismatch at {}: {} vs {}", i, a, b);
                    }
                }
            }
        }
    }
}
