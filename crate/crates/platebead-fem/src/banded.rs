//! Symmetric banded matrices with a direct LDL^T solver and a partially
//! pivoted banded LU fallback for the rare LDL^T breakdown.

use num_complex::Complex64;

use crate::error::FemError;

/// Scalar the banded solvers work over (f64 and Complex64).
pub trait Scalar:
    Copy
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::AddAssign
    + std::ops::SubAssign
{
    fn zero() -> Self;
    fn one() -> Self;
    fn mag(self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn mag(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn mag(self) -> f64 {
        self.norm()
    }
}

/// Symmetric banded matrix storing the lower band column-wise:
/// entry (i, j) with j <= i <= j + hb lives at `data[j * (hb + 1) + (i - j)]`.
#[derive(Debug, Clone)]
pub struct SymBanded<T> {
    pub n: usize,
    /// half-bandwidth (number of sub-diagonals stored)
    pub hb: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> SymBanded<T> {
    pub fn zeros(n: usize, hb: usize) -> Self {
        SymBanded { n, hb, data: vec![T::zero(); n * (hb + 1)] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.hb);
        j * (self.hb + 1) + (i - j)
    }

    /// Entry (i, j) for any i, j; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> T {
        let (lo, hi) = if i >= j { (j, i) } else { (i, j) };
        if hi - lo > self.hb {
            T::zero()
        } else {
            self.data[self.idx(hi, lo)]
        }
    }

    /// Add `v` to entry (i, j) of the lower band (callers pass i >= j).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    #[inline]
    pub fn diag(&self, j: usize) -> T {
        self.data[j * (self.hb + 1)]
    }

    /// y = A x using the symmetric structure.
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![T::zero(); self.n];
        for j in 0..self.n {
            let top = (j + self.hb).min(self.n - 1);
            let col = &self.data[j * (self.hb + 1)..];
            y[j] += col[0] * x[j];
            for i in j + 1..=top {
                let v = col[i - j];
                y[i] += v * x[j];
                y[j] += v * x[i];
            }
        }
        y
    }

    /// Dense copy, for small oracle tests.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }

    /// In-place LDL^T factorization (no pivoting). L overwrites the strict
    /// lower band, D the diagonal slots. Fails when a pivot falls below
    /// `1e-13 x` the largest original diagonal magnitude.
    pub fn ldlt(mut self) -> Result<Ldlt<T>, FemError> {
        let n = self.n;
        let hb = self.hb;
        let ld = hb + 1;
        let mut scale = 0.0f64;
        for j in 0..n {
            scale = scale.max(self.data[j * ld].mag());
        }
        let tol = 1e-13 * scale.max(f64::MIN_POSITIVE);
        // w holds L[j][k] * d[k] for the active columns k of row j
        let mut w = vec![T::zero(); hb + 1];
        for j in 0..n {
            let k0 = j.saturating_sub(hb);
            for k in k0..j {
                w[k - k0] = self.data[k * ld + (j - k)] * self.data[k * ld];
            }
            let mut d = self.data[j * ld];
            for k in k0..j {
                d -= self.data[k * ld + (j - k)] * w[k - k0];
            }
            if d.mag() <= tol {
                return Err(FemError::Breakdown { pivot: j });
            }
            self.data[j * ld] = d;
            let top = (j + hb).min(n - 1);
            for i in j + 1..=top {
                let mut s = self.data[j * ld + (i - j)];
                // row i only reaches back hb columns
                let kk0 = k0.max(i.saturating_sub(hb));
                for k in kk0..j {
                    s -= self.data[k * ld + (i - k)] * w[k - k0];
                }
                self.data[j * ld + (i - j)] = s / d;
            }
        }
        Ok(Ldlt { f: self })
    }
}

/// LDL^T factors in banded storage.
#[derive(Debug, Clone)]
pub struct Ldlt<T> {
    f: SymBanded<T>,
}

impl<T: Scalar> Ldlt<T> {
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.f.n;
        let hb = self.f.hb;
        let ld = hb + 1;
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        // L y = b
        for j in 0..n {
            let xj = x[j];
            let top = (j + hb).min(n - 1);
            let col = &self.f.data[j * ld..];
            for i in j + 1..=top {
                x[i] -= col[i - j] * xj;
            }
        }
        // D z = y
        for j in 0..n {
            x[j] = x[j] / self.f.data[j * ld];
        }
        // L^T x = z
        for j in (0..n).rev() {
            let top = (j + hb).min(n - 1);
            let col = &self.f.data[j * ld..];
            let mut s = x[j];
            for i in j + 1..=top {
                s -= col[i - j] * x[i];
            }
            x[j] = s;
        }
        x
    }
}

/// General banded LU with partial pivoting (LAPACK-style band storage with
/// room for pivoting fill). Used as fallback when LDL^T breaks down.
#[derive(Debug, Clone)]
pub struct BandLu<T> {
    n: usize,
    kl: usize,
    ku: usize,
    /// column-major: entry (i, j) at data[j * ld + (i - j + ku + kl)]
    data: Vec<T>,
    piv: Vec<usize>,
}

impl<T: Scalar> BandLu<T> {
    /// Factor a symmetric banded matrix with partial pivoting.
    pub fn factor(a: &SymBanded<T>) -> Result<Self, FemError> {
        let n = a.n;
        let kl = a.hb;
        let ku = a.hb;
        let ld = 2 * kl + ku + 1;
        let mut data = vec![T::zero(); n * ld];
        for j in 0..n {
            let lo = j.saturating_sub(ku);
            let hi = (j + kl).min(n - 1);
            for i in lo..=hi {
                data[j * ld + (i + ku + kl - j)] = a.get(i, j);
            }
        }
        let mut piv = vec![0usize; n];
        let at = |data: &[T], i: usize, j: usize| data[j * ld + (i + ku + kl - j)];
        for j in 0..n {
            // pivot search in column j, rows j..=j+kl
            let hi = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = at(&data, j, j).mag();
            for i in j + 1..=hi {
                let m = at(&data, i, j).mag();
                if m > best {
                    best = m;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(FemError::Breakdown { pivot: j });
            }
            piv[j] = p;
            let chi = (j + ku + kl).min(n - 1);
            if p != j {
                for c in j..=chi {
                    let ia = c * ld + (j + ku + kl - c);
                    let ib = c * ld + (p + ku + kl - c);
                    data.swap(ia, ib);
                }
            }
            let pivot = at(&data, j, j);
            for i in j + 1..=hi {
                let k = j * ld + (i + ku + kl - j);
                let l = data[k] / pivot;
                data[k] = l;
                for c in j + 1..=chi {
                    let u = data[c * ld + (j + ku + kl - c)];
                    let t = c * ld + (i + ku + kl - c);
                    data[t] -= l * u;
                }
            }
        }
        Ok(BandLu { n, kl, ku, data, piv })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let ld = 2 * kl + ku + 1;
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for j in 0..n {
            x.swap(j, self.piv[j]);
            let hi = (j + kl).min(n - 1);
            let xj = x[j];
            for i in j + 1..=hi {
                let l = self.data[j * ld + (i + ku + kl - j)];
                x[i] -= l * xj;
            }
        }
        for i in (0..n).rev() {
            let chi = (i + ku + kl).min(n - 1);
            let mut s = x[i];
            for c in i + 1..=chi {
                s -= self.data[c * ld + (i + ku + kl - c)] * x[c];
            }
            x[i] = s / self.data[i * ld + (ku + kl)];
        }
        x
    }
}

/// Solve with LDL^T, falling back to pivoted banded LU on breakdown.
pub fn solve_sym_banded<T: Scalar>(a: &SymBanded<T>, b: &[T]) -> Result<Vec<T>, FemError> {
    match a.clone().ldlt() {
        Ok(f) => Ok(f.solve(b)),
        Err(_) => Ok(BandLu::factor(a)?.solve(b)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym_banded(rng: &mut impl Rng, n: usize, hb: usize) -> SymBanded<Complex64> {
        let mut a = SymBanded::zeros(n, hb);
        for j in 0..n {
            for i in j..(j + hb + 1).min(n) {
                let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                a.set(i, j, v);
            }
            // diagonal dominance keeps unpivoted LDL^T well behaved
            let d = Complex64::new(4.0 + 2.0 * hb as f64, 1.0);
            a.add(j, j, d);
        }
        a
    }

    fn dense_solve(mut a: Vec<Vec<Complex64>>, mut b: Vec<Complex64>) -> Vec<Complex64> {
        let n = b.len();
        for j in 0..n {
            let p = (j..n).max_by(|&x, &y| a[x][j].norm().total_cmp(&a[y][j].norm())).unwrap();
            a.swap(j, p);
            b.swap(j, p);
            for i in j + 1..n {
                let l = a[i][j] / a[j][j];
                for c in j..n {
                    let v = a[j][c];
                    a[i][c] -= l * v;
                }
                let bj = b[j];
                b[i] -= l * bj;
            }
        }
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for i in (0..n).rev() {
            let mut s = b[i];
            for c in i + 1..n {
                s -= a[i][c] * x[c];
            }
            x[i] = s / a[i][i];
        }
        x
    }

    #[test]
    fn matvec_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_sym_banded(&mut rng, 17, 4);
        let x: Vec<Complex64> =
            (0..17).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen())).collect();
        let y = a.matvec(&x);
        let d = a.to_dense();
        for i in 0..17 {
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..17 {
                s += d[i][j] * x[j];
            }
            assert!((s - y[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn ldlt_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (n, hb) in [(1, 0), (5, 1), (12, 3), (30, 7), (30, 29)] {
            let a = random_sym_banded(&mut rng, n, hb);
            let b: Vec<Complex64> =
                (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen())).collect();
            let x = a.clone().ldlt().unwrap().solve(&b);
            let x_ref = dense_solve(a.to_dense(), b.clone());
            for i in 0..n {
                assert!((x[i] - x_ref[i]).norm() < 1e-9, "n={n} hb={hb} i={i}");
            }
        }
    }

    #[test]
    fn band_lu_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (n, hb) in [(5, 1), (12, 3), (25, 6)] {
            let a = random_sym_banded(&mut rng, n, hb);
            let b: Vec<Complex64> =
                (0..n).map(|_| Complex64::new(rng.gen(), rng.gen_range(-1.0..1.0))).collect();
            let x = BandLu::factor(&a).unwrap().solve(&b);
            let x_ref = dense_solve(a.to_dense(), b.clone());
            for i in 0..n {
                assert!((x[i] - x_ref[i]).norm() < 1e-9, "n={n} hb={hb} i={i}");
            }
        }
    }

    #[test]
    fn lu_fallback_handles_zero_leading_pivot() {
        // [[0, 1], [1, 0]]: LDL^T must break down, pivoted LU must solve it
        let mut a: SymBanded<Complex64> = SymBanded::zeros(2, 1);
        a.set(1, 0, Complex64::new(1.0, 0.0));
        assert!(matches!(a.clone().ldlt(), Err(FemError::Breakdown { pivot: 0 })));
        let b = vec![Complex64::new(3.0, 0.0), Complex64::new(5.0, 0.0)];
        let x = solve_sym_banded(&a, &b).unwrap();
        assert!((x[0] - Complex64::new(5.0, 0.0)).norm() < 1e-12);
        assert!((x[1] - Complex64::new(3.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn real_ldlt_solves_spd_system() {
        // small SPD tridiagonal with known behavior
        let n = 50;
        let mut a: SymBanded<f64> = SymBanded::zeros(n, 1);
        for j in 0..n {
            a.set(j, j, 2.0);
            if j + 1 < n {
                a.set(j + 1, j, -1.0);
            }
        }
        let b = vec![1.0; n];
        let x = a.clone().ldlt().unwrap().solve(&b);
        let r = a.matvec(&x);
        for i in 0..n {
            assert!((r[i] - 1.0).abs() < 1e-10);
        }
    }
}
