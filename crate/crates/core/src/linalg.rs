//! Small dense symmetric linear algebra: Cholesky factorization, solves,
//! inverses and Jacobi eigenvalues. Problem sizes here are the number of
//! questionnaire predictors, so O(p^3) routines are fine.

use crate::num::{Float, Matrix};

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky<F> {
    lower: Matrix<F>,
}

impl<F: Float> Cholesky<F> {
    /// Returns `None` if the matrix is not numerically positive definite.
    pub fn new(a: &Matrix<F>) -> Option<Self> {
        let n = a.rows();
        debug_assert_eq!(n, a.cols());
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                d = d - l.get(j, k) * l.get(j, k);
            }
            if !(d > F::zero()) || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            l.set(j, j, d);
            for i in j + 1..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s = s - l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / d);
            }
        }
        Some(Cholesky { lower: l })
    }

    pub fn solve(&self, b: &[F]) -> Vec<F> {
        let n = self.lower.rows();
        let l = &self.lower;
        let mut y = vec![F::zero(); n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s = s - l.get(i, k) * y[k];
            }
            y[i] = s / l.get(i, i);
        }
        let mut x = vec![F::zero(); n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s = s - l.get(k, i) * x[k];
            }
            x[i] = s / l.get(i, i);
        }
        x
    }

    pub fn inverse(&self) -> Matrix<F> {
        let n = self.lower.rows();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![F::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = F::zero());
            e[j] = F::one();
            let col = self.solve(&e);
            for (i, v) in col.into_iter().enumerate() {
                inv.set(i, j, v);
            }
        }
        // symmetrize away rounding noise
        for i in 0..n {
            for j in 0..i {
                let v = (inv.get(i, j) + inv.get(j, i)) * F::lit(0.5);
                inv.set(i, j, v);
                inv.set(j, i, v);
            }
        }
        inv
    }

    pub fn log_det(&self) -> F {
        let n = self.lower.rows();
        (0..n).map(|i| self.lower.get(i, i).ln()).sum::<F>() * F::lit(2.0)
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues<F: Float>(a: &Matrix<F>) -> Vec<F> {
    let n = a.rows();
    let mut m = a.clone();
    let eps = F::epsilon();
    for _sweep in 0..100 {
        let mut off = F::zero();
        let mut diag = F::zero();
        for i in 0..n {
            diag = diag + m.get(i, i) * m.get(i, i);
            for j in 0..i {
                off = off + m.get(i, j) * m.get(i, j);
            }
        }
        if off <= eps * eps * diag || off == F::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq == F::zero() {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (F::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + F::one()).sqrt());
                let t = if theta == F::zero() { F::one() } else { t };
                let c = F::one() / (t * t + F::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m.get(k, p);
                    let akq = m.get(k, q);
                    m.set(k, p, c * akp - s * akq);
                    m.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = m.get(p, k);
                    let aqk = m.get(q, k);
                    m.set(p, k, c * apk - s * aqk);
                    m.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }
    let mut ev: Vec<F> = (0..n).map(|i| m.get(i, i)).collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

pub fn trace<F: Float>(a: &Matrix<F>) -> F {
    (0..a.rows()).map(|i| a.get(i, i)).sum()
}

/// `x^T A y` for a square `A`.
pub fn quadratic_form<F: Float>(a: &Matrix<F>, x: &[F], y: &[F]) -> F {
    let mut s = F::zero();
    for i in 0..a.rows() {
        let row = a.row(i);
        let mut t = F::zero();
        for j in 0..a.cols() {
            t = t + row[j] * y[j];
        }
        s = s + x[i] * t;
    }
    s
}

pub fn mat_vec<F: Float>(a: &Matrix<F>, x: &[F]) -> Vec<F> {
    (0..a.rows()).map(|i| crate::num::dot(a.row(i), x)).collect()
}
