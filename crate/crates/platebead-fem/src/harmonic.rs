//! Harmonic response: per-frequency complex solves, velocity extraction,
//! frequency sweeps and the rotation-criterion field.

use num_complex::Complex64;
use platebead_core::level::level_from_field;
use platebead_core::types::{FrequencyResponse, VelocityField};

use crate::banded::{BandLu, SymBanded};
use crate::assemble::{FemSystem, DOFS_PER_NODE};
use crate::error::FemError;

/// Result of a frequency sweep. Failed frequencies are dropped from the FRF
/// and reported in `errors`.
#[derive(Debug)]
pub struct SweepResult {
    pub frf: FrequencyResponse,
    pub fields: Vec<VelocityField>,
    pub errors: Vec<(f64, String)>,
}

/// System matrix A = (1 + i eta) K_elastic + K_spring - Omega^2 M.
fn system_matrix(sys: &FemSystem, omega: f64) -> SymBanded<Complex64> {
    let scale = Complex64::new(1.0, sys.loss_factor);
    let mut a = SymBanded::zeros(sys.n, sys.k_elastic.hb);
    for (dst, &src) in a.data.iter_mut().zip(&sys.k_elastic.data) {
        *dst = scale * src;
    }
    for j in 0..sys.n {
        let d = sys.k_spring[j] - omega * omega * sys.mass[j];
        a.add(j, j, Complex64::new(d, 0.0));
    }
    a
}

/// Solve the damped system at one frequency (Hz); returns the full complex
/// DOF vector.
pub fn harmonic_solve(sys: &FemSystem, frequency: f64) -> Result<Vec<Complex64>, FemError> {
    let omega = 2.0 * std::f64::consts::PI * frequency;
    let a = system_matrix(sys, omega);
    let f: Vec<Complex64> = sys.force.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    match a.clone().ldlt() {
        Ok(fac) => Ok(fac.solve(&f)),
        Err(_) => Ok(BandLu::factor(&a)?.solve(&f)),
    }
}

/// Per-node normal-velocity magnitudes |i Omega u_z| from a solution vector.
pub fn velocity_magnitudes(sys: &FemSystem, u: &[Complex64], frequency: f64) -> Vec<f64> {
    let omega = 2.0 * std::f64::consts::PI * frequency;
    (0..sys.node_count).map(|nd| omega * u[DOFS_PER_NODE * nd + 2].norm()).collect()
}

/// Frequency sweep: FRF levels plus the per-frequency velocity fields.
pub fn solve_frf(sys: &FemSystem, frequencies: &[f64]) -> Result<SweepResult, FemError> {
    let mut fs = Vec::with_capacity(frequencies.len());
    let mut levels = Vec::with_capacity(frequencies.len());
    let mut fields = Vec::with_capacity(frequencies.len());
    let mut errors = Vec::new();
    for &f in frequencies {
        if f <= 0.0 {
            errors.push((f, "frequency must be positive".into()));
            continue;
        }
        match harmonic_solve(sys, f) {
            Ok(u) => {
                let mags = velocity_magnitudes(sys, &u, f);
                let field = VelocityField { frequency: f, magnitudes: mags };
                match level_from_field(&field) {
                    Ok(level) => {
                        fs.push(f);
                        levels.push(level);
                        fields.push(field);
                    }
                    Err(e) => errors.push((f, e.to_string())),
                }
            }
            Err(e) => errors.push((f, e.to_string())),
        }
    }
    let frf = FrequencyResponse::new(fs, levels)?;
    Ok(SweepResult { frf, fields, errors })
}

/// Rotation criterion field: per node, Riemann sum over the sweep of
/// (Omega |theta|)^2 over both bending rotation components.
pub fn rotation_field(sys: &FemSystem, frequencies: &[f64]) -> Result<Vec<f64>, FemError> {
    assert!(frequencies.len() >= 2, "rotation field needs a sweep");
    let mut acc = vec![0.0; sys.node_count];
    for (i, &f) in frequencies.iter().enumerate() {
        let df = if i + 1 < frequencies.len() {
            frequencies[i + 1] - frequencies[i]
        } else {
            frequencies[i] - frequencies[i - 1]
        };
        let omega = 2.0 * std::f64::consts::PI * f;
        let u = harmonic_solve(sys, f)?;
        for nd in 0..sys.node_count {
            let tx = u[DOFS_PER_NODE * nd + 3].norm_sqr();
            let ty = u[DOFS_PER_NODE * nd + 4].norm_sqr();
            acc[nd] += df * omega * omega * (tx + ty);
        }
    }
    Ok(acc)
}

/// Linearly spaced frequency grid, inclusive of both ends.
pub fn frequency_grid(f_min: f64, f_max: f64, df: f64) -> Vec<f64> {
    assert!(f_max > f_min && df > 0.0);
    let n = ((f_max - f_min) / df).round() as usize + 1;
    (0..n).map(|i| f_min + i as f64 * df).collect()
}

/// Indices of local FRF maxima (strictly above both neighbors).
pub fn peak_indices(levels: &[f64]) -> Vec<usize> {
    (1..levels.len().saturating_sub(1))
        .filter(|&i| levels[i] > levels[i - 1] && levels[i] >= levels[i + 1])
        .collect()
}
