//! Logistic regression fitted by iteratively reweighted least squares.

use serde::{Deserialize, Serialize};

use super::split_classes;
use crate::error::Result;
use crate::linalg::Cholesky;
use crate::num::{dot, sigmoid, Float, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub max_iter: usize,
    /// Relative deviance change below which the fit has converged.
    pub tol: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig { max_iter: 25, tol: 1e-8 }
    }
}

/// Mean deviance per row under which the classes are treated as separated.
const SEPARATION_DEVIANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LogisticModel<F: Float> {
    pub weights: Vec<F>,
    pub intercept: F,
    pub converged: bool,
    pub iterations: usize,
    pub deviance: F,
    /// Deviance after the start and after each iteration.
    pub deviance_path: Vec<F>,
}

impl<F: Float> LogisticModel<F> {
    pub fn linear_predictor(&self, row: &[F]) -> F {
        self.intercept + dot(&self.weights, row)
    }

    pub fn probability(&self, row: &[F]) -> F {
        sigmoid(self.linear_predictor(row))
    }

    /// Class 1 only when the probability is strictly above one half.
    pub fn predict(&self, row: &[F]) -> u8 {
        u8::from(self.probability(row) > F::lit(0.5))
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus<F: Float>(z: F) -> F {
    z.max(F::zero()) + (-z.abs()).exp().ln_1p()
}

fn deviance<F: Float>(x: &Matrix<F>, y: &[u8], beta: &[F]) -> F {
    let mut d = F::zero();
    for r in 0..x.rows() {
        let eta = beta[0] + dot(&beta[1..], x.row(r));
        d = d + if y[r] == 1 { softplus(-eta) } else { softplus(eta) };
    }
    d * F::lit(2.0)
}

/// Newton direction `H^-1 g` for the log-likelihood at `beta`.
fn newton_step<F: Float>(x: &Matrix<F>, y: &[u8], beta: &[F]) -> Option<Vec<F>> {
    let q = beta.len();
    let mut h = Matrix::zeros(q, q);
    let mut g = vec![F::zero(); q];
    let mut z = vec![F::one(); q];
    for r in 0..x.rows() {
        z[1..].copy_from_slice(x.row(r));
        let mu = sigmoid(beta[0] + dot(&beta[1..], x.row(r)));
        let w = mu * (F::one() - mu);
        let resid = F::from_count(y[r] as usize) - mu;
        for i in 0..q {
            g[i] = g[i] + z[i] * resid;
            for j in 0..=i {
                h.set(i, j, h.get(i, j) + w * z[i] * z[j]);
            }
        }
    }
    let mut scale = F::zero();
    for i in 0..q {
        scale = scale.max(h.get(i, i));
        for j in 0..i {
            h.set(j, i, h.get(i, j));
        }
    }
    // a singular information matrix (constant or collinear columns) gets a small ridge
    let mut ridge = F::zero();
    let base = F::lit(1e-10) * scale.max(F::lit(1e-300));
    for _ in 0..40 {
        let mut hr = h.clone();
        for i in 0..q {
            hr.set(i, i, hr.get(i, i) + ridge);
        }
        if let Some(c) = Cholesky::new(&hr) {
            let step = c.solve(&g);
            if step.iter().all(|v| v.is_finite()) {
                return Some(step);
            }
        }
        ridge = if ridge == F::zero() { base } else { ridge * F::lit(10.0) };
    }
    None
}

/// Maximizes the binomial log-likelihood by Newton steps with step halving, so
/// the deviance never increases. Separated classes run to `max_iter` and are
/// reported as not converged.
pub fn fit_logistic<F: Float>(x: &Matrix<F>, y: &[u8], config: LogisticConfig) -> Result<LogisticModel<F>> {
    let classes = split_classes(y)?;
    let n = y.len();
    let mut beta = vec![F::zero(); x.cols() + 1];
    beta[0] = (F::from_count(classes[1].len()) / F::from_count(classes[0].len())).ln();
    let mut dev = deviance(x, y, &beta);
    let mut path = vec![dev];
    let mut converged = false;
    let mut iterations = 0;
    let separated = |d: F| d / F::from_count(n) < F::lit(SEPARATION_DEVIANCE);
    while iterations < config.max_iter {
        iterations += 1;
        let Some(step) = newton_step(x, y, &beta) else { break };
        let mut t = F::one();
        let mut accepted = None;
        for _ in 0..30 {
            let trial: Vec<F> = beta.iter().zip(&step).map(|(&b, &s)| b + t * s).collect();
            let d = deviance(x, y, &trial);
            if d.is_finite() && d <= dev {
                accepted = Some((trial, d));
                break;
            }
            t = t / F::lit(2.0);
        }
        let Some((next, d)) = accepted else {
            // no descent left at working precision
            converged = !separated(dev);
            break;
        };
        let change = (dev - d).abs() / (d.abs() + F::lit(0.1));
        beta = next;
        dev = d;
        path.push(dev);
        if change < F::lit(config.tol) && !separated(dev) {
            converged = true;
            break;
        }
    }
    Ok(LogisticModel {
        intercept: beta[0],
        weights: beta[1..].to_vec(),
        converged,
        iterations,
        deviance: dev,
        deviance_path: path,
    })
}
