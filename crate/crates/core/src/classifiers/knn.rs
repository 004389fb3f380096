//! k-nearest-neighbour voting on standardized features.

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::folds::{stratified_folds, FoldAssignment};
use crate::num::{squared_distance, Float, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct KnnModel<F: Float> {
    pub x: Matrix<F>,
    pub y: Vec<u8>,
    pub k: usize,
}

pub fn fit_knn<F: Float>(x: &Matrix<F>, y: &[u8], k: usize) -> Result<KnnModel<F>> {
    if k == 0 || k > y.len() {
        return Err(Error::InvalidArgument(format!("k must lie in 1..={}, got {k}", y.len())));
    }
    Ok(KnnModel { x: x.clone(), y: y.to_vec(), k })
}

/// Training rows ordered by distance to `row`, ties by row index.
fn ranked<F: Float>(x: &Matrix<F>, row: &[F]) -> Vec<(F, usize)> {
    let mut d: Vec<(F, usize)> = (0..x.rows()).map(|r| (squared_distance(x.row(r), row), r)).collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
    d
}

impl<F: Float> KnnModel<F> {
    /// Training rows of the `k` nearest neighbours, nearest first.
    pub fn neighbors(&self, row: &[F]) -> Vec<usize> {
        ranked(&self.x, row).into_iter().take(self.k).map(|(_, r)| r).collect()
    }

    /// Majority of the `k` nearest labels; a tied vote goes to class 0.
    pub fn predict(&self, row: &[F]) -> u8 {
        let ones = self.neighbors(row).iter().filter(|&&r| self.y[r] == 1).count();
        u8::from(2 * ones > self.k)
    }
}

/// Odd `k` from 1 to 31.
pub fn default_k_candidates() -> Vec<usize> {
    (1..=31).step_by(2).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct KChoice<F: Float> {
    pub k: usize,
    /// Cross-validated error for each candidate that was evaluated.
    pub errors: Vec<(usize, F)>,
    pub folds: FoldAssignment,
}

/// Cross-validated error of every candidate on fixed folds. Candidates larger
/// than the smallest training fold are skipped.
pub fn k_errors<F: Float>(x: &Matrix<F>, y: &[u8], candidates: &[usize], folds: &FoldAssignment) -> Vec<(usize, F)> {
    let n = y.len();
    let min_train = (0..folds.k).map(|f| n - folds.test_rows(f).len()).min().unwrap_or(0);
    let ks: Vec<usize> = candidates.iter().copied().filter(|&k| k >= 1 && k <= min_train).collect();
    let mut wrong = vec![0usize; ks.len()];
    for f in 0..folds.k {
        let train = folds.train_rows(f);
        let xt = x.select_rows(&train);
        for r in folds.test_rows(f) {
            let order = ranked(&xt, x.row(r));
            let mut ones = 0;
            let mut taken = 0;
            for (c, &k) in ks.iter().enumerate() {
                while taken < k {
                    ones += usize::from(y[train[order[taken].1]] == 1);
                    taken += 1;
                }
                wrong[c] += usize::from(u8::from(2 * ones > k) != y[r]);
            }
        }
    }
    ks.into_iter().zip(wrong).map(|(k, w)| (k, F::from_count(w) / F::from_count(n))).collect()
}

/// Picks `k` by stratified cross-validation; ties go to the smaller `k`.
pub fn optimize_k<F: Float, R: Rng + ?Sized>(
    x: &Matrix<F>,
    y: &[u8],
    candidates: &[usize],
    folds: usize,
    rng: &mut R,
) -> Result<KChoice<F>> {
    if y.len() < folds {
        return Err(Error::InsufficientData(format!("{} rows for {folds} folds", y.len())));
    }
    let assignment = stratified_folds(y, folds, rng)?;
    let mut errors = k_errors(x, y, candidates, &assignment);
    errors.sort_by_key(|e| e.0);
    let best = errors
        .iter()
        .copied()
        .reduce(|a, b| if b.1 < a.1 { b } else { a })
        .ok_or_else(|| Error::InvalidArgument("no admissible k candidate".into()))?;
    Ok(KChoice { k: best.0, errors, folds: assignment })
}
