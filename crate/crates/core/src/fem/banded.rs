//! Symmetric positive definite banded storage with an in-place Cholesky
//! factorization.

use crate::error::{Error, Result};

/// Lower band of a symmetric matrix. Row `i` stores columns `i - bw ..= i`.
#[derive(Debug, Clone)]
pub struct BandedSpd {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + self.bw + j - i
    }

    /// Adds `v` at `(i, j)`; entries above the diagonal are mirrored.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = self.offset(i, j);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.offset(i, j)]
        }
    }

    /// Zeroes row and column `d` and puts `1` on the diagonal.
    pub fn constrain(&mut self, d: usize) {
        for j in d.saturating_sub(self.bw)..d {
            let k = self.offset(d, j);
            self.data[k] = 0.0;
        }
        for i in d + 1..(d + self.bw + 1).min(self.n) {
            let k = self.offset(i, d);
            self.data[k] = 0.0;
        }
        let k = self.offset(d, d);
        self.data[k] = 1.0;
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..i {
                let a = self.data[self.offset(i, j)];
                y[i] += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += self.data[self.offset(i, i)] * x[i];
        }
        y
    }

    /// Cholesky factorization `A = L Lᵀ`, consuming the matrix.
    pub fn cholesky(mut self) -> Result<BandedCholesky> {
        let n = self.n;
        let bw = self.bw;
        let w = bw + 1;
        let max_diag = (0..n)
            .map(|i| self.data[i * w + bw].abs())
            .fold(0.0_f64, f64::max);
        let tol = 1e-13 * max_diag.max(f64::MIN_POSITIVE);
        let mut deficient = 0usize;

        for i in 0..n {
            let lo_i = i.saturating_sub(bw);
            for j in lo_i..=i {
                let lo = lo_i.max(j.saturating_sub(bw));
                let ri = i * w + bw - i;
                let rj = j * w + bw - j;
                let dot: f64 = self.data[ri + lo..ri + j]
                    .iter()
                    .zip(&self.data[rj + lo..rj + j])
                    .map(|(a, b)| a * b)
                    .sum();
                let v = self.data[ri + j] - dot;
                if i == j {
                    if v > tol && v.is_finite() {
                        self.data[ri + j] = v.sqrt();
                    } else {
                        deficient += 1;
                        self.data[ri + j] = 1.0;
                    }
                } else {
                    self.data[ri + j] = v / self.data[rj + j];
                }
            }
        }
        if deficient > 0 {
            return Err(Error::SingularStiffness {
                deficient_dofs: deficient,
            });
        }
        Ok(BandedCholesky { factor: self })
    }
}

#[derive(Debug, Clone)]
pub struct BandedCholesky {
    factor: BandedSpd,
}

impl BandedCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let l = &self.factor;
        let (n, bw) = (l.n, l.bw);
        let w = bw + 1;
        let mut y = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let ri = i * w + bw - i;
            let dot: f64 = l.data[ri + lo..ri + i].iter().zip(&y[lo..i]).map(|(a, b)| a * b).sum();
            y[i] = (y[i] - dot) / l.data[ri + i];
        }
        for i in (0..n).rev() {
            let ri = i * w + bw - i;
            y[i] /= l.data[ri + i];
            let yi = y[i];
            let lo = i.saturating_sub(bw);
            for j in lo..i {
                y[j] -= l.data[ri + j] * yi;
            }
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn random_banded(n: usize, bw: usize, seed: u64) -> (BandedSpd, DMatrix<f64>) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut dense = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(bw)..i {
                let v: f64 = rng.gen_range(-1.0..1.0);
                dense[(i, j)] = v;
                dense[(j, i)] = v;
            }
            dense[(i, i)] = 2.0 * bw as f64 + rng.gen_range(0.0..1.0);
        }
        let mut band = BandedSpd::zeros(n, bw);
        for i in 0..n {
            for j in i.saturating_sub(bw)..=i {
                band.add(i, j, dense[(i, j)]);
            }
        }
        (band, dense)
    }

    #[test]
    fn solve_matches_dense() {
        let (band, dense) = random_banded(40, 5, 7);
        let b: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).sin()).collect();
        let x = band.clone().cholesky().unwrap().solve(&b);
        let expect = dense.clone().cholesky().unwrap().solve(&DVector::from_vec(b.clone()));
        for (a, e) in x.iter().zip(expect.iter()) {
            assert!((a - e).abs() < 1e-12 * e.abs().max(1.0));
        }
        let ax = band.mul_vec(&x);
        for (r, bi) in ax.iter().zip(&b) {
            assert!((r - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn constrain_clears_row_and_column() {
        let (mut band, _) = random_banded(10, 3, 1);
        band.constrain(4);
        for j in 0..10 {
            let expect = if j == 4 { 1.0 } else { 0.0 };
            assert_eq!(band.get(4, j), expect);
            assert_eq!(band.get(j, 4), expect);
        }
    }

    #[test]
    fn singular_reports_deficient_count() {
        let mut band = BandedSpd::zeros(4, 1);
        band.add(0, 0, 1.0);
        band.add(1, 1, 1.0);
        match band.cholesky() {
            Err(Error::SingularStiffness { deficient_dofs }) => assert_eq!(deficient_dofs, 2),
            other => panic!("expected singular error, got {other:?}"),
        }
    }
}
