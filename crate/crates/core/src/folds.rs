//! Stratified k-fold assignment.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    /// Fold index of every row.
    pub fold_of: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

impl FoldAssignment {
    pub fn n_rows(&self) -> usize {
        self.fold_of.len()
    }

    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&r| self.fold_of[r] == fold).collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&r| self.fold_of[r] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Assigns rows to `k` folds so that fold sizes differ by at most one and each
/// fold's class-1 count is within one of its proportional share.
///
/// Fold sizes are fixed first (the first `n mod k` folds take one extra row).
/// Each fold's class-1 quota is the floor of `size * n1 / n`, with the leftover
/// class-1 rows handed to the folds with the largest remainders (lower fold index
/// on ties). Rows of each class are shuffled and dealt out in fold order.
pub fn stratified_folds<R: Rng + ?Sized>(y: &[u8], k: usize, rng: &mut R) -> Result<FoldAssignment> {
    let n = y.len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("{k} folds requested for {n} rows")));
    }
    let seed: u64 = rng.gen();
    let mut local = ChaCha8Rng::seed_from_u64(seed);

    let mut ones: Vec<usize> = (0..n).filter(|&r| y[r] == 1).collect();
    let mut zeros: Vec<usize> = (0..n).filter(|&r| y[r] != 1).collect();
    zeros.shuffle(&mut local);
    ones.shuffle(&mut local);
    let n1 = ones.len();

    let sizes: Vec<usize> = (0..k).map(|f| n / k + usize::from(f < n % k)).collect();
    let mut quota: Vec<usize> = sizes.iter().map(|&s| s * n1 / n).collect();
    let mut by_remainder: Vec<usize> = (0..k).collect();
    by_remainder.sort_by_key(|&f| (std::cmp::Reverse((sizes[f] * n1) % n), f));
    let leftover = n1 - quota.iter().sum::<usize>();
    for &f in by_remainder.iter().take(leftover) {
        quota[f] += 1;
    }

    let mut fold_of = vec![0; n];
    let (mut i1, mut i0) = (0, 0);
    for f in 0..k {
        for _ in 0..quota[f] {
            fold_of[ones[i1]] = f;
            i1 += 1;
        }
        for _ in 0..sizes[f] - quota[f] {
            fold_of[zeros[i0]] = f;
            i0 += 1;
        }
    }
    Ok(FoldAssignment { fold_of, k, seed })
}
