//! Banded LU with partial pivoting.
//!
//! Both implicit sub-steps produce matrices whose couplings stay within a
//! fixed distance of the diagonal (a few cells in 1D, a few grid rows in 2D),
//! so a direct banded factorization is exact up to rounding and has a
//! reproducible operation order.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct BandedMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Real> BandedMatrix<T> {
    /// `n × n` zero matrix with `kl` sub- and `ku` super-diagonals. Storage
    /// reserves `kl` extra super-diagonals for pivoting fill-in.
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![T::zero(); n * width] }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.width + (j + self.kl - i)
    }

    /// Adds `v` to entry `(i, j)`; `j` must lie inside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let s = self.slot(i, j);
        self.data[s] = self.data[s] + v;
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if j + self.kl < i || j > i + self.ku + self.kl {
            T::zero()
        } else {
            self.data[self.slot(i, j)]
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).fold(T::zero(), |acc, j| acc + self.get(i, j) * x[j])
            })
            .collect()
    }

    /// Solves `A x = b` in place (`b` becomes `x`), consuming the matrix.
    pub fn solve(mut self, b: &mut [T]) -> Result<()> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::ShapeMismatch { expected: n, got: b.len() });
        }
        let reach = self.ku + self.kl;
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last_row {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > T::zero()) || !best.is_finite() {
                return Err(Error::SolverDiverged(format!("singular pivot in column {k}")));
            }
            let last_col = (k + reach).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let (a, c) = (self.slot(k, j), self.slot(p, j));
                    self.data.swap(a, c);
                }
                b.swap(k, p);
            }
            let pivot = self.get(k, k);
            for i in k + 1..=last_row {
                let sik = self.slot(i, k);
                let m = self.data[sik] / pivot;
                if m == T::zero() {
                    continue;
                }
                self.data[sik] = T::zero();
                for j in k + 1..=last_col {
                    let skj = self.data[self.slot(k, j)];
                    let sij = self.slot(i, j);
                    self.data[sij] = self.data[sij] - m * skj;
                }
                b[i] = b[i] - m * b[k];
            }
        }
        for i in (0..n).rev() {
            let last_col = (i + reach).min(n - 1);
            let mut acc = b[i];
            for j in i + 1..=last_col {
                acc = acc - self.data[self.slot(i, j)] * b[j];
            }
            b[i] = acc / self.data[self.slot(i, i)];
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_solve_matches_dense() {
        // [2 1 0; 1 3 1; 0 1 4] x = [3, 5, 5] -> x = [1, 1, 1]
        let mut a = BandedMatrix::<f64>::zeros(3, 1, 1);
        for (i, j, v) in [(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0), (1, 2, 1.0), (2, 1, 1.0), (2, 2, 4.0)] {
            a.add(i, j, v);
        }
        let mut b = vec![3.0, 5.0, 5.0];
        a.solve(&mut b).unwrap();
        for v in b {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        // [0 1; 1 0] x = [2, 3] -> x = [3, 2]
        let mut a = BandedMatrix::<f64>::zeros(2, 1, 1);
        a.add(0, 1, 1.0);
        a.add(1, 0, 1.0);
        let mut b = vec![2.0, 3.0];
        a.solve(&mut b).unwrap();
        assert_eq!(b, vec![3.0, 2.0]);
    }

    #[test]
    fn singular_matrix_reported() {
        let a = BandedMatrix::<f64>::zeros(2, 1, 1);
        assert!(a.solve(&mut [1.0, 1.0]).is_err());
    }

    #[test]
    fn random_pentadiagonal_residual_small() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 40;
        let mut a = BandedMatrix::<f64>::zeros(n, 2, 2);
        for i in 0..n {
            for j in i.saturating_sub(2)..=(i + 2).min(n - 1) {
                a.add(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut b = a.mul_vec(&x_true);
        a.solve(&mut b).unwrap();
        let err = b.iter().zip(&x_true).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "err = {err}");
    }
}
