//! Differentiable design objectives evaluated on a predicted FRF: the
//! band-averaged level and the softmax-weighted first-eigenfrequency
//! objective (pushing the first resonance upward by minimizing J).

use ndarray::{Array2, ArrayD, IxDyn};
use platebead_core::level::trapezoid_weights;
use platebead_nn::{Tape, Var};

use crate::error::OptError;

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveSpec {
    /// Mean level L̄_v over [f1, f2] (dB), to be minimized.
    MeanLevel { f1: f64, f2: f64 },
    /// J = -softmax_{β_J}-weighted mean frequency below the first two peaks.
    FirstEig { beta_j: f64, blur_sigma: f64 },
}

impl ObjectiveSpec {
    pub fn mean_level(f1: f64, f2: f64) -> Self {
        ObjectiveSpec::MeanLevel { f1, f2 }
    }

    pub fn first_eig() -> Self {
        ObjectiveSpec::FirstEig { beta_j: 1.0, blur_sigma: 2.0 }
    }

    /// On-tape evaluation: `levels` is the [n] vector of FRF levels at
    /// `frequencies` (strictly increasing).
    pub fn eval_on_tape(
        &self,
        tape: &mut Tape,
        levels: Var,
        frequencies: &[f64],
    ) -> Result<Var, OptError> {
        match *self {
            ObjectiveSpec::MeanLevel { f1, f2 } => {
                objective_mean_level(tape, levels, frequencies, f1, f2)
            }
            ObjectiveSpec::FirstEig { beta_j, blur_sigma } => {
                objective_first_eig(tape, levels, frequencies, beta_j, blur_sigma)
            }
        }
    }

    /// Numeric evaluation of the same expression (constants on a throwaway
    /// tape, guaranteeing bit-identical arithmetic with the guided path).
    pub fn eval(&self, levels: &[f64], frequencies: &[f64]) -> Result<f64, OptError> {
        let mut tape = Tape::new();
        let lv = tape.constant(
            ArrayD::from_shape_vec(IxDyn(&[levels.len()]), levels.to_vec()).unwrap(),
        );
        let j = self.eval_on_tape(&mut tape, lv, frequencies)?;
        Ok(tape.scalar_value(j))
    }
}

/// Band-averaged level: trapezoid weights over the samples inside [f1, f2].
pub fn objective_mean_level(
    tape: &mut Tape,
    levels: Var,
    frequencies: &[f64],
    f1: f64,
    f2: f64,
) -> Result<Var, OptError> {
    let n = frequencies.len();
    assert_eq!(tape.value(levels).shape(), &[n], "levels shape");
    if !(f1 < f2) {
        return Err(OptError::Config(format!("empty band [{f1}, {f2}]")));
    }
    let idx: Vec<usize> =
        (0..n).filter(|&i| frequencies[i] >= f1 && frequencies[i] <= f2).collect();
    if idx.len() < 2 {
        return Err(OptError::Config(format!(
            "fewer than two FRF samples inside [{f1}, {f2}] Hz"
        )));
    }
    let sel: Vec<f64> = idx.iter().map(|&i| frequencies[i]).collect();
    let wsel = trapezoid_weights(&sel);
    let mut w = vec![0.0; n];
    for (k, &i) in idx.iter().enumerate() {
        w[i] = wsel[k];
    }
    let wv = tape.constant(ArrayD::from_shape_vec(IxDyn(&[n]), w).unwrap());
    let prod = tape.mul(levels, wv);
    Ok(tape.sum(prod))
}

/// Gaussian blur matrix over uniform samples (rows normalized, 4-sigma
/// truncation).
fn blur_matrix(n: usize, sigma: f64) -> Array2<f64> {
    let mut m = Array2::zeros((n, n));
    let reach = (4.0 * sigma).ceil() as isize;
    for i in 0..n as isize {
        let mut sum = 0.0;
        for j in (i - reach).max(0)..=(i + reach).min(n as isize - 1) {
            let d = (j - i) as f64;
            let w = (-d * d / (2.0 * sigma * sigma)).exp();
            m[[i as usize, j as usize]] = w;
            sum += w;
        }
        for j in 0..n {
            m[[i as usize, j]] /= sum;
        }
    }
    m
}

/// Strict local maxima with prominence >= `min_prominence`, in index order.
pub fn prominent_peaks(levels: &[f64], min_prominence: f64) -> Vec<usize> {
    let n = levels.len();
    let mut peaks = Vec::new();
    for i in 1..n.saturating_sub(1) {
        if !(levels[i] > levels[i - 1] && levels[i] > levels[i + 1]) {
            continue;
        }
        // walk outward until a higher sample or the boundary; the prominence
        // is the drop to the higher of the two side minima
        let mut left_min = levels[i];
        let mut j = i;
        while j > 0 {
            j -= 1;
            if levels[j] > levels[i] {
                break;
            }
            left_min = left_min.min(levels[j]);
        }
        let mut right_min = levels[i];
        let mut j = i;
        while j + 1 < n {
            j += 1;
            if levels[j] > levels[i] {
                break;
            }
            right_min = right_min.min(levels[j]);
        }
        if levels[i] - left_min.max(right_min) >= min_prominence {
            peaks.push(i);
        }
    }
    peaks
}

const PEAK_PROMINENCE_DB: f64 = 1.0;

/// First-eigenfrequency objective: blur the FRF, find the first two peaks,
/// and return J = -(∫ Ω e^{β_J L} dΩ) / (∫ e^{β_J L} dΩ) over [0, Ω_p] with
/// Ω_p the midpoint of the two peak frequencies. Peak positions are treated
/// as constants; the integrals differentiate through the (blurred) levels.
pub fn objective_first_eig(
    tape: &mut Tape,
    levels: Var,
    frequencies: &[f64],
    beta_j: f64,
    blur_sigma: f64,
) -> Result<Var, OptError> {
    let n = frequencies.len();
    assert_eq!(tape.value(levels).shape(), &[n], "levels shape");
    let bm = blur_matrix(n, blur_sigma);
    let bmv = tape.constant(bm.clone().into_dyn());
    let col = tape.reshape(levels, &[n, 1]);
    let blurred = tape.matmul(bmv, col);
    let blurred = tape.reshape(blurred, &[n]);

    let smooth: Vec<f64> = tape.value(blurred).iter().copied().collect();
    let peaks = prominent_peaks(&smooth, PEAK_PROMINENCE_DB);
    if peaks.len() < 2 {
        return Err(OptError::ObjectiveUndefined(format!(
            "only {} prominent peak(s) found in the blurred FRF",
            peaks.len()
        )));
    }
    let omega_p = 0.5 * (frequencies[peaks[0]] + frequencies[peaks[1]]);
    let m = frequencies.iter().take_while(|&&f| f <= omega_p).count();
    if m < 2 {
        return Err(OptError::ObjectiveUndefined(format!(
            "fewer than two samples below the peak midpoint {omega_p} Hz"
        )));
    }

    // trapezoid quadrature weights over [f_0, f_{m-1}], softmax stabilized
    // by shifting with the maximum blurred level (cancels in the quotient)
    let lmax = smooth[..m].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let quad = trapezoid_weights(&frequencies[..m]);
    let mut wnum = vec![0.0; n];
    let mut wden = vec![0.0; n];
    for i in 0..m {
        wnum[i] = quad[i] * frequencies[i];
        wden[i] = quad[i];
    }
    let shifted = tape.add_const(blurred, -lmax);
    let scaled = tape.scale(shifted, beta_j);
    let e = tape.exp(scaled);
    let wnv = tape.constant(ArrayD::from_shape_vec(IxDyn(&[n]), wnum).unwrap());
    let wdv = tape.constant(ArrayD::from_shape_vec(IxDyn(&[n]), wden).unwrap());
    let pn = tape.mul(e, wnv);
    let pd = tape.mul(e, wdv);
    let num = tape.sum(pn);
    let den = tape.sum(pd);
    let q = tape.div(num, den);
    Ok(tape.scale(q, -1.0))
}
