//! Linear and quadratic Gaussian discriminants.

use serde::{Deserialize, Serialize};

use super::split_classes;
use crate::error::Result;
use crate::linalg::{symmetric_eigenvalues, trace, Cholesky};
use crate::num::{Float, Matrix};

/// Relative ridge added to a near-singular covariance.
pub const RIDGE_SCALE: f64 = 1e-6;
/// Smallest eigenvalue below which the ridge engages.
pub const RIDGE_THRESHOLD: f64 = 1e-10;

/// Adds `1e-6 * trace / p` to the diagonal when the smallest eigenvalue is
/// below `1e-10`. Returns the factorization, the covariance actually used and
/// the total ridge added.
fn regularize<F: Float>(mut cov: Matrix<F>) -> (Cholesky<F>, Matrix<F>, Option<F>) {
    let p = cov.rows();
    let tr = trace(&cov);
    let base = if tr > F::zero() { F::lit(RIDGE_SCALE) * tr / F::from_count(p) } else { F::lit(RIDGE_SCALE) };
    let add = |cov: &mut Matrix<F>, amount: F| {
        for i in 0..p {
            cov.set(i, i, cov.get(i, i) + amount);
        }
    };
    let min_eig = symmetric_eigenvalues(&cov).first().copied().unwrap_or(F::zero());
    let mut ridge = None;
    if min_eig < F::lit(RIDGE_THRESHOLD) {
        add(&mut cov, base);
        ridge = Some(base);
    }
    loop {
        if let Some(chol) = Cholesky::new(&cov) {
            return (chol, cov, ridge);
        }
        // rounding can still defeat the ridge; grow it tenfold
        let extra = ridge.map_or(base, |r| r * F::lit(9.0));
        add(&mut cov, extra);
        ridge = Some(ridge.unwrap_or(F::zero()) + extra);
    }
}

fn class_mean<F: Float>(x: &Matrix<F>, rows: &[usize]) -> Vec<F> {
    let mut m = vec![F::zero(); x.cols()];
    for &r in rows {
        for (a, &v) in m.iter_mut().zip(x.row(r)) {
            *a = *a + v;
        }
    }
    let n = F::from_count(rows.len());
    m.iter_mut().for_each(|a| *a = *a / n);
    m
}

/// Sum of outer products of centred rows.
fn scatter<F: Float>(x: &Matrix<F>, rows: &[usize], mean: &[F], into: &mut Matrix<F>) {
    let p = x.cols();
    let mut d = vec![F::zero(); p];
    for &r in rows {
        for (j, v) in x.row(r).iter().enumerate() {
            d[j] = *v - mean[j];
        }
        for i in 0..p {
            for j in 0..=i {
                let v = into.get(i, j) + d[i] * d[j];
                into.set(i, j, v);
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            into.set(j, i, into.get(i, j));
        }
    }
}

fn scaled<F: Float>(mut m: Matrix<F>, divisor: usize) -> Matrix<F> {
    if divisor > 0 {
        let d = F::from_count(divisor);
        for i in 0..m.rows() {
            for v in m.row_mut(i) {
                *v = *v / d;
            }
        }
    } else {
        m = Matrix::zeros(m.rows(), m.cols());
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LdaModel<F: Float> {
    /// Class 0 and class 1 means.
    pub means: [Vec<F>; 2],
    pub covariance: Matrix<F>,
    pub inverse: Matrix<F>,
    pub log_priors: [F; 2],
    /// Diagonal ridge added to the pooled covariance, if any.
    pub ridge: Option<F>,
    /// Linear score coefficients and offset of `score(1) - score(0)`.
    weights: Vec<F>,
    offset: F,
}

impl<F: Float> LdaModel<F> {
    /// Discriminant difference: positive favours class 1.
    pub fn decision(&self, row: &[F]) -> F {
        self.weights.iter().zip(row).fold(self.offset, |acc, (&w, &v)| acc + w * v)
    }

    pub fn predict(&self, row: &[F]) -> u8 {
        u8::from(self.decision(row) > F::zero())
    }
}

/// Fits LDA with the pooled within-class covariance (divisor `n - 2`).
pub fn fit_lda<F: Float>(x: &Matrix<F>, y: &[u8]) -> Result<LdaModel<F>> {
    let classes = split_classes(y)?;
    let n = y.len();
    let p = x.cols();
    let means = [class_mean(x, &classes[0]), class_mean(x, &classes[1])];
    let mut s = Matrix::zeros(p, p);
    for k in 0..2 {
        scatter(x, &classes[k], &means[k], &mut s);
    }
    let (chol, covariance, ridge) = regularize(scaled(s, n.saturating_sub(2)));
    let inverse = chol.inverse();
    let log_priors = [0, 1].map(|k| (F::from_count(classes[k].len()) / F::from_count(n)).ln());
    // w = S^-1 (m1 - m0), c = -1/2 (m1' S^-1 m1 - m0' S^-1 m0) + log(pi1 / pi0)
    let a0 = chol.solve(&means[0]);
    let a1 = chol.solve(&means[1]);
    let weights: Vec<F> = a1.iter().zip(&a0).map(|(&u, &v)| u - v).collect();
    let q = |m: &[F], a: &[F]| m.iter().zip(a).fold(F::zero(), |acc, (&u, &v)| acc + u * v);
    let offset = -(q(&means[1], &a1) - q(&means[0], &a0)) / F::lit(2.0) + log_priors[1] - log_priors[0];
    Ok(LdaModel { means, covariance, inverse, log_priors, ridge, weights, offset })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct QdaModel<F: Float> {
    pub means: [Vec<F>; 2],
    pub covariances: [Matrix<F>; 2],
    pub inverses: [Matrix<F>; 2],
    pub log_dets: [F; 2],
    pub log_priors: [F; 2],
    /// Ridge added to each class covariance, if any.
    pub ridges: [Option<F>; 2],
}

impl<F: Float> QdaModel<F> {
    fn score(&self, k: usize, row: &[F]) -> F {
        let d: Vec<F> = row.iter().zip(&self.means[k]).map(|(&a, &b)| a - b).collect();
        let inv = &self.inverses[k];
        let mut quad = F::zero();
        for i in 0..d.len() {
            let mut s = F::zero();
            for j in 0..d.len() {
                s = s + inv.get(i, j) * d[j];
            }
            quad = quad + d[i] * s;
        }
        -(self.log_dets[k] + quad) / F::lit(2.0) + self.log_priors[k]
    }

    pub fn decision(&self, row: &[F]) -> F {
        self.score(1, row) - self.score(0, row)
    }

    pub fn predict(&self, row: &[F]) -> u8 {
        u8::from(self.decision(row) > F::zero())
    }

    pub fn ridged(&self) -> bool {
        self.ridges.iter().any(Option::is_some)
    }
}

/// Fits QDA with per-class covariances (divisor `n_k - 1`).
pub fn fit_qda<F: Float>(x: &Matrix<F>, y: &[u8]) -> Result<QdaModel<F>> {
    let classes = split_classes(y)?;
    let n = y.len();
    let p = x.cols();
    let means = [class_mean(x, &classes[0]), class_mean(x, &classes[1])];
    let fit = |k: usize| {
        let mut s = Matrix::zeros(p, p);
        scatter(x, &classes[k], &means[k], &mut s);
        regularize(scaled(s, classes[k].len() - 1))
    };
    let (c0, cov0, r0) = fit(0);
    let (c1, cov1, r1) = fit(1);
    Ok(QdaModel {
        log_dets: [c0.log_det(), c1.log_det()],
        inverses: [c0.inverse(), c1.inverse()],
        covariances: [cov0, cov1],
        log_priors: [0, 1].map(|k| (F::from_count(classes[k].len()) / F::from_count(n)).ln()),
        ridges: [r0, r1],
        means,
    })
}
