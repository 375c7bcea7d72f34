//! Small dense `n x n` matrices (n <= 3) for effective tensors.

use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmallMatrix<T> {
    pub dim: usize,
    pub a: [[T; 3]; 3],
}

impl<T: Real> SmallMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, a: [[T::zero(); 3]; 3] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(dim, T::one())
    }

    pub fn diagonal(dim: usize, v: T) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.a[i][i] = v;
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.a[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.a[i][j] = v;
    }

    pub fn transpose(&self) -> Self {
        let mut t = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                t.a[i][j] = self.a[j][i];
            }
        }
        t
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> T {
        let mut m = T::zero();
        for i in 0..self.dim {
            for j in 0..self.dim {
                m = m.max(self.a[i][j].abs());
            }
        }
        m
    }

    /// `max |a_ij - a_ji|`.
    pub fn asymmetry(&self) -> T {
        let mut m = T::zero();
        for i in 0..self.dim {
            for j in 0..self.dim {
                m = m.max((self.a[i][j] - self.a[j][i]).abs());
            }
        }
        m
    }

    pub fn symmetric_part(&self) -> Self {
        let mut s = *self;
        let half = T::lit(0.5);
        for i in 0..self.dim {
            for j in 0..self.dim {
                s.a[i][j] = half * (self.a[i][j] + self.a[j][i]);
            }
        }
        s
    }

    /// Ascending eigenvalues of the symmetric part (cyclic Jacobi).
    pub fn eigenvalues(&self) -> Vec<T> {
        let n = self.dim;
        let mut a = self.symmetric_part().a;
        for _ in 0..64 {
            let mut off = T::zero();
            for i in 0..n {
                for j in i + 1..n {
                    off += a[i][j] * a[i][j];
                }
            }
            if off <= T::epsilon() * T::epsilon() * self.max_abs().powi(2) {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q] == T::zero() {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (T::lit(2.0) * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
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
                }
            }
        }
        let mut ev: Vec<T> = (0..n).map(|i| a[i][i]).collect();
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
        ev
    }

    /// Row-major entries `a_11, a_12, ..., a_nn`.
    pub fn entries(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(self.dim * self.dim);
        for i in 0..self.dim {
            v.extend_from_slice(&self.a[i][..self.dim]);
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn eigenvalues_match_nalgebra(v in proptest::collection::vec(-5.0f64..5.0, 6)) {
            let mut m = SmallMatrix::zeros(3);
            let idx = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
            for (k, &(i, j)) in idx.iter().enumerate() {
                m.set(i, j, v[k]);
                m.set(j, i, v[k]);
            }
            let ours = m.eigenvalues();
            let na = Matrix3::from_fn(|i, j| m.get(i, j));
            let mut theirs: Vec<f64> = na.symmetric_eigenvalues().iter().copied().collect();
            theirs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (a, b) in ours.iter().zip(&theirs) {
                prop_assert!((a - b).abs() < 1e-10, "{ours:?} vs {theirs:?}");
            }
        }
    }

    #[test]
    fn two_by_two() {
        let mut m = SmallMatrix::<f64>::identity(2);
        m.set(0, 1, 0.5);
        m.set(1, 0, 0.5);
        let ev = m.eigenvalues();
        assert!((ev[0] - 0.5).abs() < 1e-15 && (ev[1] - 1.5).abs() < 1e-15);
        assert_eq!(m.entries(), vec![1.0, 0.5, 0.5, 1.0]);
    }
}
