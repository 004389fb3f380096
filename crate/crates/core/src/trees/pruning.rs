//! Cost-complexity (weakest-link) pruning and cross-validated choice of the
//! complexity parameter.
//!
//! Breakpoints are kept as exact fractions of misclassification counts, so
//! nodes with equal link strength are always collapsed together and the
//! resulting alphas are strictly increasing.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cart::{grow_tree, majority, node_errors, DecisionTree, TreeNode};
use crate::folds::stratified_folds;
use crate::num::{Float, Matrix};

/// Exact ratio `num / den` of misclassification counts per removed leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub const ZERO: Ratio = Ratio { num: 0, den: 1 };

    fn cmp(self, other: Ratio) -> std::cmp::Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PruningStep<F: Float> {
    /// Complexity parameter, in misclassification rate per leaf.
    pub alpha: F,
    /// The same breakpoint as an exact count ratio (divide by `n` for `alpha`).
    pub link: Ratio,
    pub tree: DecisionTree<F>,
    pub leaves: usize,
    pub resubstitution_error: F,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PruningPath<F: Float> {
    pub steps: Vec<PruningStep<F>>,
    pub n: usize,
}

impl<F: Float> PruningPath<F> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Index of the subtree optimal for `alpha`: the last step whose alpha is `<= alpha`.
    pub fn index_for(&self, alpha: F) -> usize {
        self.steps.iter().rposition(|s| s.alpha <= alpha).unwrap_or(0)
    }

    pub fn subtree_for(&self, alpha: F) -> &DecisionTree<F> {
        &self.steps[self.index_for(alpha)].tree
    }
}

/// Flattened view of a tree for pruning.
struct Arena<F: Float> {
    counts: Vec<[usize; 2]>,
    children: Vec<Option<(usize, usize)>>,
    split: Vec<Option<(usize, F)>>,
}

impl<F: Float> Arena<F> {
    fn from_tree(root: &TreeNode<F>) -> Self {
        let mut a = Arena { counts: Vec::new(), children: Vec::new(), split: Vec::new() };
        a.push(root);
        a
    }

    fn push(&mut self, node: &TreeNode<F>) -> usize {
        let id = self.counts.len();
        self.counts.push([0, 0]);
        self.children.push(None);
        self.split.push(None);
        if let TreeNode::Split { variable, threshold, left, right, .. } = node {
            let l = self.push(left);
            let r = self.push(right);
            self.children[id] = Some((l, r));
            self.split[id] = Some((*variable, *threshold));
        }
        id
    }

    fn route_counts(&mut self, x: &Matrix<F>, y: &[u8]) {
        for c in &mut self.counts {
            *c = [0, 0];
        }
        for r in 0..x.rows() {
            let row = x.row(r);
            let mut id = 0;
            loop {
                self.counts[id][y[r] as usize] += 1;
                match (self.children[id], self.split[id]) {
                    (Some((l, rt)), Some((v, t))) => id = if row[v] <= t { l } else { rt },
                    _ => break,
                }
            }
        }
    }

    /// Subtree errors and leaves under `id` with `collapsed` nodes treated as leaves.
    fn subtree_stats(&self, id: usize, collapsed: &[bool], out: &mut [(usize, usize)]) -> (usize, usize) {
        let stats = match self.children[id] {
            Some((l, r)) if !collapsed[id] => {
                let a = self.subtree_stats(l, collapsed, out);
                let b = self.subtree_stats(r, collapsed, out);
                (a.0 + b.0, a.1 + b.1)
            }
            _ => (node_errors(self.counts[id]), 1),
        };
        out[id] = stats;
        stats
    }

    fn internal_nodes(&self, id: usize, collapsed: &[bool], out: &mut Vec<usize>) {
        if let Some((l, r)) = self.children[id] {
            if !collapsed[id] {
                out.push(id);
                self.internal_nodes(l, collapsed, out);
                self.internal_nodes(r, collapsed, out);
            }
        }
    }

    fn build(&self, id: usize, collapsed: &[bool]) -> TreeNode<F> {
        let counts = self.counts[id];
        match (self.children[id], self.split[id]) {
            (Some((l, r)), Some((variable, threshold))) if !collapsed[id] => TreeNode::Split {
                variable,
                threshold,
                counts,
                left: Box::new(self.build(l, collapsed)),
                right: Box::new(self.build(r, collapsed)),
            },
            _ => TreeNode::Leaf { class: majority(counts), counts },
        }
    }
}

/// Weakest-link pruning sequence for a tree, with node counts taken by routing
/// `(x, y)` through it. The first step is the smallest subtree with the full
/// tree's resubstitution error (alpha 0); the last is the root alone.
pub fn pruning_path<F: Float>(tree: &DecisionTree<F>, x: &Matrix<F>, y: &[u8]) -> PruningPath<F> {
    let mut arena = Arena::from_tree(&tree.root);
    arena.route_counts(x, y);
    let n = x.rows();
    let m = arena.counts.len();
    let mut collapsed = vec![false; m];
    let mut stats = vec![(0usize, 0usize); m];

    // alpha = 0: collapse, bottom-up, every split that does not reduce errors
    fn zero_gain<F: Float>(a: &Arena<F>, id: usize, collapsed: &mut [bool]) -> usize {
        match a.children[id] {
            Some((l, r)) => {
                let below = zero_gain(a, l, collapsed) + zero_gain(a, r, collapsed);
                if node_errors(a.counts[id]) <= below {
                    collapsed[id] = true;
                    node_errors(a.counts[id])
                } else {
                    below
                }
            }
            None => node_errors(a.counts[id]),
        }
    }
    zero_gain(&arena, 0, &mut collapsed);

    let make_step = |collapsed: &[bool], link: Ratio, stats: &mut [(usize, usize)]| {
        let (errors, leaves) = arena.subtree_stats(0, collapsed, stats);
        let nf = F::from_count(n.max(1));
        PruningStep {
            alpha: F::lit(link.num as f64) / F::lit(link.den as f64) / nf,
            link,
            tree: DecisionTree {
                root: arena.build(0, collapsed),
                config: tree.config,
                n_train: tree.n_train,
                n_features: tree.n_features,
            },
            leaves,
            resubstitution_error: F::from_count(errors) / nf,
        }
    };

    let mut steps = vec![make_step(&collapsed, Ratio::ZERO, &mut stats)];
    let mut internal = Vec::new();
    loop {
        internal.clear();
        arena.internal_nodes(0, &collapsed, &mut internal);
        if internal.is_empty() {
            break;
        }
        arena.subtree_stats(0, &collapsed, &mut stats);
        let link_of = |id: usize| Ratio {
            num: (node_errors(arena.counts[id]) - stats[id].0) as u64,
            den: (stats[id].1 - 1) as u64,
        };
        let weakest = internal.iter().map(|&id| link_of(id)).min_by(|a, b| a.cmp(*b)).expect("non-empty");
        for &id in &internal {
            if link_of(id).cmp(weakest).is_eq() {
                collapsed[id] = true;
            }
        }
        steps.push(make_step(&collapsed, weakest, &mut stats));
    }
    PruningPath { steps, n }
}

/// The two rules for picking a subtree from cross-validated path errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PruneRule {
    /// Alpha with the lowest cross-validated error (smallest alpha on ties).
    MinError,
    /// Largest alpha whose error is within one standard error of the minimum.
    OneStandardError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PathValidation<F: Float> {
    /// Cross-validated misclassification rate per path step.
    pub cv_error: Vec<F>,
    /// Binomial standard error `sqrt(e (1 - e) / n)` per step.
    pub std_error: Vec<F>,
}

impl<F: Float> PathValidation<F> {
    pub fn choose(&self, rule: PruneRule) -> usize {
        let mut best = 0;
        for (i, &e) in self.cv_error.iter().enumerate() {
            if e < self.cv_error[best] {
                best = i;
            }
        }
        match rule {
            PruneRule::MinError => best,
            PruneRule::OneStandardError => {
                let bound = self.cv_error[best] + self.std_error[best];
                // tolerate rounding in the sum
                let slack = F::epsilon() * F::lit(16.0);
                self.cv_error.iter().rposition(|&e| e <= bound + slack).unwrap_or(best)
            }
        }
    }
}

/// Cross-validates every step of `path` with trees regrown on stratified folds.
/// Step `k` is scored at the geometric mean of its alpha and the next one (the
/// last step at infinity, i.e. each fold's root).
pub fn validate_path<F: Float, R: Rng + ?Sized>(
    path: &PruningPath<F>,
    x: &Matrix<F>,
    y: &[u8],
    folds: usize,
    rng: &mut R,
) -> PathValidation<F> {
    let n = x.rows();
    let steps = path.steps.len();
    let config = path.steps[0].tree.config;
    let mut wrong = vec![0usize; steps];
    let probes: Vec<Option<F>> = (0..steps)
        .map(|k| path.steps.get(k + 1).map(|next| (path.steps[k].alpha * next.alpha).sqrt()))
        .collect();
    let k = folds.min(n);
    if k >= 2 {
        if let Ok(assign) = stratified_folds(y, k, rng) {
            for f in 0..k {
                let train = assign.train_rows(f);
                let test = assign.test_rows(f);
                let xt = x.select_rows(&train);
                let yt: Vec<u8> = train.iter().map(|&r| y[r]).collect();
                let fold_tree = grow_tree(&xt, &yt, config);
                let fold_path = pruning_path(&fold_tree, &xt, &yt);
                for (s, probe) in probes.iter().enumerate() {
                    let sub = match probe {
                        Some(a) => fold_path.subtree_for(*a),
                        None => &fold_path.steps[fold_path.steps.len() - 1].tree,
                    };
                    wrong[s] += test.iter().filter(|&&r| sub.predict(x.row(r)) != y[r]).count();
                }
            }
        }
    }
    let nf = F::from_count(n.max(1));
    let cv_error: Vec<F> = wrong.iter().map(|&w| F::from_count(w) / nf).collect();
    let std_error = cv_error.iter().map(|&e| (e * (F::one() - e) / nf).sqrt()).collect();
    PathValidation { cv_error, std_error }
}

/// Picks a subtree from the path by internal stratified cross-validation.
pub fn prune<F: Float, R: Rng + ?Sized>(
    path: &PruningPath<F>,
    x: &Matrix<F>,
    y: &[u8],
    rule: PruneRule,
    folds: usize,
    rng: &mut R,
) -> DecisionTree<F> {
    let v = validate_path(path, x, y, folds, rng);
    path.steps[v.choose(rule)].tree.clone()
}
