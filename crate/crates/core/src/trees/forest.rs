//! Bootstrap forests of unpruned trees with per-node predictor sampling.
//!
//! Tree `i` draws from its own generator, seeded with the forest seed on
//! stream `i`, so growth can run in parallel and still match a sequential run.
//! Each generator first draws the `n` bootstrap rows, then the candidate
//! predictors for every node in preorder.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cart::{grow_on_rows, DecisionTree, FeatureIndex, TreeConfig};
use crate::error::{Error, Result};
use crate::folds::{stratified_folds, FoldAssignment};
use crate::num::{Float, Matrix};

pub const DEFAULT_TREES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Predictors sampled at every node.
    pub mtry: usize,
    pub tree: TreeConfig,
    /// Draw a bootstrap sample per tree. Disabling it grows every tree on all rows.
    pub bootstrap: bool,
}

impl ForestConfig {
    pub fn new(n_trees: usize, mtry: usize) -> Self {
        ForestConfig { n_trees, mtry, tree: TreeConfig::fully_grown(), bootstrap: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ForestTree<F: Float> {
    pub tree: DecisionTree<F>,
    /// Training rows drawn for this tree, in draw order (repeats allowed).
    pub sample: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RandomForest<F: Float> {
    pub trees: Vec<ForestTree<F>>,
    pub config: ForestConfig,
    pub seed: u64,
    pub n_features: usize,
}

impl<F: Float> RandomForest<F> {
    /// Votes for class 0 and class 1.
    pub fn votes(&self, row: &[F]) -> [usize; 2] {
        let mut v = [0, 0];
        for t in &self.trees {
            v[t.tree.predict(row) as usize] += 1;
        }
        v
    }

    pub fn try_votes(&self, row: &[Option<F>]) -> Result<[usize; 2]> {
        let mut v = [0, 0];
        for t in &self.trees {
            v[t.tree.try_predict(row)? as usize] += 1;
        }
        Ok(v)
    }

    /// Majority vote; an exact tie goes to class 0.
    pub fn predict(&self, row: &[F]) -> u8 {
        let v = self.votes(row);
        u8::from(v[1] > v[0])
    }

    /// Fraction of trees voting for class 1.
    pub fn probability(&self, row: &[F]) -> F {
        let v = self.votes(row);
        F::from_count(v[1]) / F::from_count(self.trees.len())
    }

    pub fn predict_all(&self, x: &Matrix<F>) -> Vec<u8> {
        (0..x.rows()).map(|r| self.predict(x.row(r))).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("forest serializes")
    }
}

/// Grows `config.n_trees` trees. One `u64` is drawn from `rng` as the forest seed.
pub fn fit_forest<F: Float, R: Rng + ?Sized>(
    x: &Matrix<F>,
    y: &[u8],
    config: ForestConfig,
    rng: &mut R,
) -> Result<RandomForest<F>> {
    let seed = rng.gen::<u64>();
    let index = FeatureIndex::new(x);
    fit_indexed(&index, x.cols(), y, config, seed)
}

fn fit_indexed<F: Float>(
    index: &FeatureIndex<F>,
    p: usize,
    y: &[u8],
    config: ForestConfig,
    seed: u64,
) -> Result<RandomForest<F>> {
    let n = y.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("a forest needs at least 2 rows, got {n}")));
    }
    if config.n_trees == 0 {
        return Err(Error::InvalidArgument("a forest needs at least one tree".into()));
    }
    if config.mtry == 0 || config.mtry > p {
        return Err(Error::InvalidArgument(format!("mtry must lie in 1..={p}, got {}", config.mtry)));
    }
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let sample: Vec<usize> =
                if config.bootstrap { (0..n).map(|_| rng.gen_range(0..n)).collect() } else { (0..n).collect() };
            let tree = grow_on_rows(index, y, sample.clone(), config.tree, Some((&mut rng, config.mtry)));
            ForestTree { tree, sample }
        })
        .collect();
    Ok(RandomForest { trees, config, seed, n_features: p })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MtryObjective {
    Resubstitution,
    CrossValidation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MtryChoice<F: Float> {
    pub mtry: usize,
    /// Error rate for mtry = 1, 2, ..., p.
    pub errors: Vec<F>,
    pub seed: u64,
    pub folds: Option<FoldAssignment>,
}

/// Folds used by the cross-validated objective.
pub const MTRY_FOLDS: usize = 10;

/// Error rate of a forest with the given `mtry`. Every candidate is scored with
/// the same `seed` (and the same `folds` for the cross-validated objective).
pub fn mtry_error<F: Float>(
    x: &Matrix<F>,
    y: &[u8],
    n_trees: usize,
    mtry: usize,
    objective: MtryObjective,
    seed: u64,
    folds: Option<&FoldAssignment>,
) -> Result<F> {
    let n = y.len();
    let config = ForestConfig::new(n_trees, mtry);
    let wrong = match (objective, folds) {
        (MtryObjective::Resubstitution, _) => {
            let f = fit_indexed(&FeatureIndex::new(x), x.cols(), y, config, seed)?;
            (0..n).filter(|&r| f.predict(x.row(r)) != y[r]).count()
        }
        (MtryObjective::CrossValidation, Some(folds)) => {
            let mut wrong = 0;
            for k in 0..folds.k {
                let train = folds.train_rows(k);
                let xt = x.select_rows(&train);
                let yt: Vec<u8> = train.iter().map(|&r| y[r]).collect();
                let mut fold_seed = ChaCha8Rng::seed_from_u64(seed);
                fold_seed.set_stream(k as u64 + 1);
                let f = fit_indexed(&FeatureIndex::new(&xt), xt.cols(), &yt, config, fold_seed.gen())?;
                wrong += folds.test_rows(k).iter().filter(|&&r| f.predict(x.row(r)) != y[r]).count();
            }
            wrong
        }
        (MtryObjective::CrossValidation, None) => {
            return Err(Error::InvalidArgument("cross-validated mtry error needs folds".into()))
        }
    };
    Ok(F::from_count(wrong) / F::from_count(n))
}

/// Tries every mtry in `1..=p` and returns the one with the lowest error
/// (smaller mtry on ties). Draws one seed, then the folds, from `rng`.
pub fn optimize_mtry<F: Float, R: Rng + ?Sized>(
    x: &Matrix<F>,
    y: &[u8],
    n_trees: usize,
    objective: MtryObjective,
    rng: &mut R,
) -> Result<MtryChoice<F>> {
    let p = x.cols();
    if p == 0 {
        return Err(Error::InvalidArgument("no predictors".into()));
    }
    let seed = rng.gen::<u64>();
    let folds = match objective {
        MtryObjective::CrossValidation => Some(stratified_folds(y, MTRY_FOLDS.min(y.len()), rng)?),
        MtryObjective::Resubstitution => None,
    };
    let mut errors = Vec::with_capacity(p);
    for m in 1..=p {
        errors.push(mtry_error(x, y, n_trees, m, objective, seed, folds.as_ref())?);
    }
    let mut best = 0;
    for (i, &e) in errors.iter().enumerate() {
        if e < errors[best] {
            best = i;
        }
    }
    Ok(MtryChoice { mtry: best + 1, errors, seed, folds })
}
