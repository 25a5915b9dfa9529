//! Velocity-field to dB-level conversions.

use crate::error::CoreError;
use crate::types::{FrequencyResponse, VelocityField};

/// Reference for the spatially averaged squared velocity, m^2/s^2.
pub const V_REF: f64 = 1e-9;

/// Mean squared velocity level: 10 log10( mean(v^2) / v_ref ).
pub fn level_from_field(field: &VelocityField) -> Result<f64, CoreError> {
    if field.magnitudes.is_empty() {
        return Err(CoreError::invalid("velocity field", "empty node set"));
    }
    let mean_sq = field.magnitudes.iter().map(|&v| v * v).sum::<f64>()
        / field.magnitudes.len() as f64;
    if mean_sq <= 0.0 {
        return Err(CoreError::NonFiniteLevel);
    }
    Ok(10.0 * (mean_sq / V_REF).log10())
}

/// Level of a raw mean-square velocity value (m^2/s^2).
pub fn level_from_mean_square(mean_sq: f64) -> Result<f64, CoreError> {
    if mean_sq <= 0.0 || !mean_sq.is_finite() {
        return Err(CoreError::NonFiniteLevel);
    }
    Ok(10.0 * (mean_sq / V_REF).log10())
}

/// Frequency-averaged level over [lo, hi] via the trapezoid rule on the FRF
/// samples inside the range, normalized by the span of those samples.
pub fn mean_level(frf: &FrequencyResponse, lo: f64, hi: f64) -> Result<f64, CoreError> {
    if !(lo < hi) {
        return Err(CoreError::RangeNotCovered { lo, hi });
    }
    let (fmin, fmax) = match (frf.frequencies.first(), frf.frequencies.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(CoreError::RangeNotCovered { lo, hi }),
    };
    if fmin > lo || fmax < hi {
        return Err(CoreError::RangeNotCovered { lo, hi });
    }
    let idx: Vec<usize> = (0..frf.len())
        .filter(|&i| frf.frequencies[i] >= lo && frf.frequencies[i] <= hi)
        .collect();
    if idx.len() < 2 {
        return Err(CoreError::InsufficientResolution { lo, hi });
    }
    let mut integral = 0.0;
    for pair in idx.windows(2) {
        let (i, j) = (pair[0], pair[1]);
        let df = frf.frequencies[j] - frf.frequencies[i];
        integral += 0.5 * (frf.levels[i] + frf.levels[j]) * df;
    }
    let span = frf.frequencies[*idx.last().unwrap()] - frf.frequencies[idx[0]];
    Ok(integral / span)
}

/// Trapezoid weights for samples at the given strictly increasing frequencies,
/// normalized so the weights sum to 1. Used wherever the frequency average has
/// to be expressed as a fixed linear combination of per-frequency levels.
pub fn trapezoid_weights(frequencies: &[f64]) -> Vec<f64> {
    let n = frequencies.len();
    assert!(n >= 2, "need at least two samples");
    let span = frequencies[n - 1] - frequencies[0];
    let mut w = vec![0.0; n];
    for i in 0..n - 1 {
        let df = frequencies[i + 1] - frequencies[i];
        w[i] += 0.5 * df;
        w[i + 1] += 0.5 * df;
    }
    for wi in &mut w {
        *wi /= span;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn field(mags: Vec<f64>) -> VelocityField {
        VelocityField { frequency: 100.0, magnitudes: mags }
    }

    #[test]
    fn constant_field_closed_form() {
        // all nodes 1e-3 m/s -> 10 log10(1e-6 / 1e-9) = 30 dB
        let l = level_from_field(&field(vec![1e-3; 7])).unwrap();
        assert_abs_diff_eq!(l, 30.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_field_is_an_error() {
        assert!(matches!(
            level_from_field(&field(vec![0.0; 4])),
            Err(CoreError::NonFiniteLevel)
        ));
    }

    #[test]
    fn two_node_field() {
        // mean square = (0 + 4e-6)/2 = 2e-6 -> 10 log10(2e3)
        let l = level_from_field(&field(vec![0.0, 2e-3])).unwrap();
        assert_abs_diff_eq!(l, 10.0 * 2000f64.log10(), epsilon = 1e-12);
        assert_abs_diff_eq!(l, 33.0103, epsilon = 1e-4);
    }

    #[test]
    fn monotone_in_each_node() {
        let base = field(vec![1e-3, 2e-3, 5e-4]);
        let l0 = level_from_field(&base).unwrap();
        for i in 0..3 {
            let mut f = base.clone();
            f.magnitudes[i] *= 1.01;
            assert!(level_from_field(&f).unwrap() > l0);
        }
    }

    #[test]
    fn mean_level_constant() {
        let frf = FrequencyResponse::new(vec![100.0, 150.0, 200.0], vec![25.0; 3]).unwrap();
        assert_abs_diff_eq!(mean_level(&frf, 100.0, 200.0).unwrap(), 25.0, epsilon = 1e-12);
    }

    #[test]
    fn mean_level_linear() {
        let freqs: Vec<f64> = (0..=10).map(|i| 100.0 + 10.0 * i as f64).collect();
        let levels: Vec<f64> = freqs.iter().map(|f| 10.0 + (f - 100.0) * 0.2).collect();
        let frf = FrequencyResponse::new(freqs, levels).unwrap();
        assert_abs_diff_eq!(mean_level(&frf, 100.0, 200.0).unwrap(), 20.0, epsilon = 1e-12);
    }

    #[test]
    fn mean_level_hand_trapezoid() {
        // {100:10, 150:30, 200:10}: two trapezoids of area 1000 each -> 2000/100 = 20
        let frf =
            FrequencyResponse::new(vec![100.0, 150.0, 200.0], vec![10.0, 30.0, 10.0]).unwrap();
        assert_abs_diff_eq!(mean_level(&frf, 100.0, 200.0).unwrap(), 20.0, epsilon = 1e-12);
    }

    #[test]
    fn mean_level_refinement_invariance() {
        // piecewise-linear FRF: refining the sampling must not change the average
        let coarse =
            FrequencyResponse::new(vec![100.0, 150.0, 200.0], vec![10.0, 30.0, 10.0]).unwrap();
        let fine_freqs: Vec<f64> = (0..=20).map(|i| 100.0 + 5.0 * i as f64).collect();
        let interp = |f: f64| {
            if f <= 150.0 {
                10.0 + (f - 100.0) * 0.4
            } else {
                30.0 - (f - 150.0) * 0.4
            }
        };
        let fine_levels: Vec<f64> = fine_freqs.iter().map(|&f| interp(f)).collect();
        let fine = FrequencyResponse::new(fine_freqs, fine_levels).unwrap();
        assert_abs_diff_eq!(
            mean_level(&coarse, 100.0, 200.0).unwrap(),
            mean_level(&fine, 100.0, 200.0).unwrap(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn mean_level_needs_two_samples() {
        let frf = FrequencyResponse::new(vec![50.0, 150.0, 250.0], vec![5.0, 6.0, 7.0]).unwrap();
        assert!(matches!(
            mean_level(&frf, 140.0, 160.0),
            Err(CoreError::InsufficientResolution { .. })
        ));
    }

    #[test]
    fn trapezoid_weights_reproduce_mean_level() {
        let frf =
            FrequencyResponse::new(vec![100.0, 150.0, 200.0], vec![10.0, 30.0, 10.0]).unwrap();
        let w = trapezoid_weights(&frf.frequencies);
        let via_weights: f64 = w.iter().zip(&frf.levels).map(|(wi, li)| wi * li).sum();
        assert_abs_diff_eq!(via_weights, mean_level(&frf, 100.0, 200.0).unwrap(), epsilon = 1e-12);
    }
}
