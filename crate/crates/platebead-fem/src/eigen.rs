//! Lowest eigenfrequencies of the undamped system via inverse (shift-free)
//! subspace iteration with M-orthonormalization and a small Jacobi Ritz solve.

use crate::assemble::FemSystem;
use crate::banded::Ldlt;
use crate::error::FemError;

/// Symmetric Jacobi eigen-decomposition of a small dense matrix. Returns
/// (eigenvalues ascending, column eigenvectors).
fn jacobi_eig(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for i in 0..n {
        v[i][i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
    let vals = order.iter().map(|&i| a[i][i]).collect();
    let vecs = (0..n).map(|r| order.iter().map(|&c| v[r][c]).collect()).collect();
    (vals, vecs)
}

fn m_dot(m: &[f64], a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).zip(m).map(|((x, y), w)| x * y * w).sum()
}

/// Lowest `count` eigenfrequencies in Hz of (K_elastic + K_spring, M) on the
/// constrained system.
pub fn lowest_eigenfrequencies(sys: &FemSystem, count: usize) -> Result<Vec<f64>, FemError> {
    let n = sys.n;
    let mdiag = &sys.mass;
    // A = K_elastic + spring diagonal
    let mut a = sys.k_elastic.clone();
    for j in 0..n {
        let s = sys.k_spring[j];
        if s != 0.0 {
            a.add(j, j, s);
        }
    }
    let fac: Ldlt<f64> = a.clone().ldlt()?;

    let m_sub = (count + 4).min(n);
    // deterministic pseudo-random start vectors
    let mut x: Vec<Vec<f64>> = (0..m_sub)
        .map(|k| {
            (0..n)
                .map(|i| {
                    let s = ((i as f64 + 1.3) * (k as f64 * 2.7 + 1.1)).sin();
                    if sys.mass[i] > 0.0 {
                        s
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();

    let mut last = vec![f64::INFINITY; count];
    for iter in 0..300 {
        // inverse iteration step y_k = A^-1 M x_k
        let mut y: Vec<Vec<f64>> = x
            .iter()
            .map(|xk| {
                let mx: Vec<f64> = xk.iter().zip(mdiag).map(|(v, m)| v * m).collect();
                fac.solve(&mx)
            })
            .collect();
        // M-orthonormalize (modified Gram-Schmidt)
        for i in 0..m_sub {
            for j in 0..i {
                let (head, tail) = y.split_at_mut(i);
                let c = m_dot(mdiag, &head[j], &tail[0]);
                for (t, &h) in tail[0].iter_mut().zip(&head[j]) {
                    *t -= c * h;
                }
            }
            let norm = m_dot(mdiag, &y[i], &y[i]).sqrt();
            if norm <= 0.0 || !norm.is_finite() {
                return Err(FemError::Singular("mass-orthonormalization collapsed".into()));
            }
            for v in y[i].iter_mut() {
                *v /= norm;
            }
        }
        // Ritz projection: Kr = Y' A Y (Mr = I by construction)
        let ay: Vec<Vec<f64>> = y.iter().map(|yk| a.matvec(yk)).collect();
        let mut kr = vec![vec![0.0; m_sub]; m_sub];
        for i in 0..m_sub {
            for j in i..m_sub {
                let v: f64 = y[i].iter().zip(&ay[j]).map(|(a, b)| a * b).sum();
                kr[i][j] = v;
                kr[j][i] = v;
            }
        }
        let (vals, vecs) = jacobi_eig(kr);
        // rotate the basis to the Ritz vectors
        let mut xn: Vec<Vec<f64>> = vec![vec![0.0; n]; m_sub];
        for k in 0..m_sub {
            for (j, yj) in y.iter().enumerate() {
                let w = vecs[j][k];
                if w != 0.0 {
                    for (t, &v) in xn[k].iter_mut().zip(yj) {
                        *t += w * v;
                    }
                }
            }
        }
        x = xn;
        let current: Vec<f64> = vals.iter().take(count).copied().collect();
        let converged = current
            .iter()
            .zip(&last)
            .all(|(c, l)| (c - l).abs() <= 1e-10 * c.abs().max(1e-30));
        last = current;
        if converged && iter >= 2 {
            return Ok(last.iter().map(|&l| l.max(0.0).sqrt() / (2.0 * std::f64::consts::PI)).collect());
        }
    }
    Err(FemError::EigenNoConvergence { iters: 300 })
}
