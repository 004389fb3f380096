//! Soft-margin support vector classifier with a Gaussian kernel, solved by
//! sequential minimal optimization with second-order working-set selection.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::split_classes;
use crate::error::{Error, Result};
use crate::num::{squared_distance, Float, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SvmVariant {
    /// Bandwidth from the median pairwise distance.
    MedianHeuristic,
    /// Bandwidth `1 / p`.
    InverseDimension,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub variant: SvmVariant,
    pub c: f64,
    /// KKT violation at which the solver stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl SvmConfig {
    pub fn new(variant: SvmVariant) -> Self {
        SvmConfig { variant, c: 1.0, tol: 1e-3, max_iter: 1_000_000 }
    }
}

/// Pairs sampled for the median heuristic.
pub const MEDIAN_PAIRS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SvmModel<F: Float> {
    pub support_vectors: Matrix<F>,
    /// `alpha_i * y_i` per support vector, with `y` in {-1, +1}.
    pub dual_coef: Vec<F>,
    pub bias: F,
    pub gamma: F,
    pub c: F,
    pub variant: SvmVariant,
    /// Training row of each support vector.
    pub support: Vec<usize>,
    pub iterations: usize,
}

impl<F: Float> SvmModel<F> {
    pub fn decision(&self, row: &[F]) -> F {
        let mut s = self.bias;
        for (i, &a) in self.dual_coef.iter().enumerate() {
            s = s + a * (-self.gamma * squared_distance(self.support_vectors.row(i), row)).exp();
        }
        s
    }

    pub fn predict(&self, row: &[F]) -> u8 {
        u8::from(self.decision(row) > F::zero())
    }
}

/// `1 / (2 median^2)` over pairwise Euclidean distances: all pairs when there are
/// at most [`MEDIAN_PAIRS`], otherwise that many pairs drawn from `rng`.
pub fn median_gamma<F: Float, R: Rng + ?Sized>(x: &Matrix<F>, rng: &mut R) -> Option<F> {
    let n = x.rows();
    if n < 2 {
        return None;
    }
    let mut d: Vec<F> = if n * (n - 1) / 2 <= MEDIAN_PAIRS {
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| squared_distance(x.row(i), x.row(j))).collect()
    } else {
        (0..MEDIAN_PAIRS)
            .map(|_| {
                let i = rng.gen_range(0..n);
                let j = (i + rng.gen_range(1..n)) % n;
                squared_distance(x.row(i), x.row(j))
            })
            .collect()
    };
    d.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let m = d.len();
    let med_sq = if m % 2 == 1 { d[m / 2] } else { (d[m / 2 - 1] + d[m / 2]) / F::lit(2.0) };
    (med_sq > F::zero()).then(|| F::one() / (F::lit(2.0) * med_sq))
}

/// Fits the C-SVC dual. The median heuristic falls back to `1 / p` when the
/// median distance is zero.
pub fn fit_svm<F: Float, R: Rng + ?Sized>(x: &Matrix<F>, y: &[u8], config: SvmConfig, rng: &mut R) -> Result<SvmModel<F>> {
    split_classes(y)?;
    let n = x.rows();
    let p = x.cols().max(1);
    let inv_p = F::one() / F::from_count(p);
    let gamma = match config.variant {
        SvmVariant::MedianHeuristic => median_gamma(x, rng).unwrap_or(inv_p),
        SvmVariant::InverseDimension => inv_p,
    };
    let c = F::lit(config.c);
    let sign: Vec<F> = y.iter().map(|&v| if v == 1 { F::one() } else { -F::one() }).collect();

    let mut k = vec![F::zero(); n * n];
    k.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (-gamma * squared_distance(x.row(i), x.row(j))).exp();
        }
    });
    let kk = |i: usize, j: usize| k[i * n + j];

    let tau = F::lit(1e-12);
    let eps = F::lit(config.tol);
    let mut alpha = vec![F::zero(); n];
    // gradient of 1/2 a'Qa - e'a
    let mut g = vec![-F::one(); n];
    let mut iterations = 0;
    loop {
        // i maximizes -y G over the set that may move up
        let mut gmax = F::neg_infinity();
        let mut i_sel = None;
        for t in 0..n {
            let up = if sign[t] > F::zero() { alpha[t] < c } else { alpha[t] > F::zero() };
            if up && -sign[t] * g[t] > gmax {
                gmax = -sign[t] * g[t];
                i_sel = Some(t);
            }
        }
        let Some(i) = i_sel else { break };
        let mut gmax2 = F::neg_infinity();
        let mut j_sel = None;
        let mut best = F::infinity();
        for t in 0..n {
            let low = if sign[t] > F::zero() { alpha[t] > F::zero() } else { alpha[t] < c };
            if !low {
                continue;
            }
            let v = sign[t] * g[t];
            gmax2 = gmax2.max(v);
            let grad_diff = gmax + v;
            if grad_diff > F::zero() {
                let mut quad = kk(i, i) + kk(t, t) - F::lit(2.0) * kk(i, t);
                if quad <= F::zero() {
                    quad = tau;
                }
                let obj = -(grad_diff * grad_diff) / quad;
                if obj < best {
                    best = obj;
                    j_sel = Some(t);
                }
            }
        }
        let Some(j) = j_sel else { break };
        if gmax + gmax2 < eps {
            break;
        }
        if iterations >= config.max_iter {
            return Err(Error::Convergence(format!(
                "SMO did not reach KKT tolerance {} in {} iterations (violation {})",
                config.tol,
                config.max_iter,
                (gmax + gmax2).as_f64()
            )));
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let mut quad = kk(i, i) + kk(j, j) - F::lit(2.0) * kk(i, j);
        if quad <= F::zero() {
            quad = tau;
        }
        if sign[i] != sign[j] {
            let delta = (-g[i] - g[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] = alpha[i] + delta;
            alpha[j] = alpha[j] + delta;
            if diff > F::zero() {
                if alpha[j] < F::zero() {
                    alpha[j] = F::zero();
                    alpha[i] = diff;
                }
            } else if alpha[i] < F::zero() {
                alpha[i] = F::zero();
                alpha[j] = -diff;
            }
            if diff > F::zero() {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (g[i] - g[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] = alpha[i] - delta;
            alpha[j] = alpha[j] + delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < F::zero() {
                alpha[j] = F::zero();
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < F::zero() {
                alpha[i] = F::zero();
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            g[t] = g[t] + sign[t] * (sign[i] * kk(i, t) * di + sign[j] * kk(j, t) * dj);
        }
    }

    // offset from free vectors, or the midpoint of the feasible interval
    let (mut ub, mut lb) = (F::infinity(), F::neg_infinity());
    let (mut free, mut sum_free) = (0usize, F::zero());
    for t in 0..n {
        let yg = sign[t] * g[t];
        if alpha[t] >= c {
            if sign[t] < F::zero() {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= F::zero() {
            if sign[t] > F::zero() {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free = sum_free + yg;
        }
    }
    let rho = if free > 0 { sum_free / F::from_count(free) } else { (ub + lb) / F::lit(2.0) };

    let support: Vec<usize> = (0..n).filter(|&t| alpha[t] > F::zero()).collect();
    Ok(SvmModel {
        support_vectors: x.select_rows(&support),
        dual_coef: support.iter().map(|&t| alpha[t] * sign[t]).collect(),
        bias: -rho,
        gamma,
        c,
        variant: config.variant,
        support,
        iterations,
    })
}
