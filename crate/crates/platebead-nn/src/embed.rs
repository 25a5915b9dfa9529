//! Sinusoidal embeddings for scalar conditioning inputs (excitation
//! frequency, diffusion time).

use ndarray::{Array2, ArrayD};

/// Transformer-style embedding of a scalar into `dim` values: interleaved
/// sin/cos over geometrically spaced frequencies between 1e3 and 1e-3, wide
/// enough to resolve both unit-interval times and excitation frequencies in
/// the hundreds of Hz.
pub fn sinusoidal(value: f64, dim: usize) -> Vec<f64> {
    assert!(dim >= 2 && dim % 2 == 0, "embedding dim must be even, got {dim}");
    let half = dim / 2;
    let mut out = Vec::with_capacity(dim);
    for i in 0..half {
        let freq = 1e3 * (-(1e6f64.ln()) * i as f64 / (half - 1).max(1) as f64).exp();
        out.push((value * freq).sin());
        out.push((value * freq).cos());
    }
    out
}

/// Batch embedding: one row per sample, summing the embeddings of all scalars
/// conditioning that sample (e.g. frequency and diffusion time).
pub fn embed_batch(scalars: &[Vec<f64>], dim: usize) -> ArrayD<f64> {
    let b = scalars.len();
    let mut m = Array2::<f64>::zeros((b, dim));
    for (bi, row) in scalars.iter().enumerate() {
        for &s in row {
            for (j, v) in sinusoidal(s, dim).into_iter().enumerate() {
                m[[bi, j]] += v;
            }
        }
    }
    m.into_dyn()
}
