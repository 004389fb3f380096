//! Binary classification trees grown by Gini impurity decrease.
//!
//! Splits are ordinal: a row goes left when its value is at most the split
//! threshold, and thresholds are always observed values. Candidate splits are
//! compared in exact integer arithmetic, so ties resolve deterministically to
//! the lower variable index and then the lower threshold.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{Float, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// Nodes with fewer rows than this are not split.
    pub min_split: usize,
    /// Each child of a split must keep at least this many rows.
    pub min_bucket: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig { min_split: 20, min_bucket: 7 }
    }
}

impl TreeConfig {
    /// Grow until every leaf is pure or holds identical rows.
    pub fn fully_grown() -> Self {
        TreeConfig { min_split: 1, min_bucket: 1 }
    }
}

/// Predicted class for a pair of class counts; ties go to class 0.
#[inline]
pub fn majority(counts: [usize; 2]) -> u8 {
    u8::from(counts[1] > counts[0])
}

/// Misclassified count when a node predicts its majority class.
#[inline]
pub(crate) fn node_errors(counts: [usize; 2]) -> usize {
    if counts[1] > counts[0] {
        counts[0]
    } else {
        counts[1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", bound = "")]
pub enum TreeNode<F: Float> {
    Leaf {
        class: u8,
        counts: [usize; 2],
    },
    Split {
        variable: usize,
        threshold: F,
        counts: [usize; 2],
        left: Box<TreeNode<F>>,
        right: Box<TreeNode<F>>,
    },
}

impl<F: Float> TreeNode<F> {
    pub fn counts(&self) -> [usize; 2] {
        match self {
            TreeNode::Leaf { counts, .. } | TreeNode::Split { counts, .. } => *counts,
        }
    }

    pub fn leaf(counts: [usize; 2]) -> Self {
        TreeNode::Leaf { class: majority(counts), counts }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => 1 + left.n_nodes() + right.n_nodes(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DecisionTree<F: Float> {
    pub root: TreeNode<F>,
    pub config: TreeConfig,
    pub n_train: usize,
    pub n_features: usize,
}

impl<F: Float> DecisionTree<F> {
    /// Routes a fully observed row to its leaf class.
    pub fn predict(&self, row: &[F]) -> u8 {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { class, .. } => return *class,
                TreeNode::Split { variable, threshold, left, right, .. } => {
                    node = if row[*variable] <= *threshold { left } else { right };
                }
            }
        }
    }

    /// Routes a row that may contain missing values; fails only if a missing
    /// value is needed on the routing path.
    pub fn try_predict(&self, row: &[Option<F>]) -> Result<u8> {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { class, .. } => return Ok(*class),
                TreeNode::Split { variable, threshold, left, right, .. } => {
                    let v = row[*variable].ok_or_else(|| {
                        Error::InvalidArgument(format!("predictor {variable} is missing on the routing path"))
                    })?;
                    node = if v <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict_all(&self, x: &Matrix<F>) -> Vec<u8> {
        (0..x.rows()).map(|r| self.predict(x.row(r))).collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.root.n_leaves()
    }

    pub fn resubstitution_errors(&self, x: &Matrix<F>, y: &[u8]) -> usize {
        (0..x.rows()).filter(|&r| self.predict(x.row(r)) != y[r]).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serializes")
    }
}

/// Per-feature ordering of a design matrix: each value's rank among the
/// feature's sorted distinct values. Shared by every tree of a forest.
#[derive(Debug, Clone)]
pub(crate) struct FeatureIndex<F> {
    ranks: Vec<Vec<u32>>,
    values: Vec<Vec<F>>,
}

impl<F: Float> FeatureIndex<F> {
    pub(crate) fn new(x: &Matrix<F>) -> Self {
        let mut ranks = Vec::with_capacity(x.cols());
        let mut values = Vec::with_capacity(x.cols());
        for c in 0..x.cols() {
            let mut distinct: Vec<F> = x.column(c).collect();
            distinct.sort_by(|a, b| a.partial_cmp(b).expect("finite features"));
            distinct.dedup();
            let r = x
                .column(c)
                .map(|v| distinct.partition_point(|&d| d < v) as u32)
                .collect();
            ranks.push(r);
            values.push(distinct);
        }
        FeatureIndex { ranks, values }
    }

    fn n_features(&self) -> usize {
        self.ranks.len()
    }
}

/// `num / den` compared exactly.
#[derive(Debug, Clone, Copy)]
struct Frac {
    num: u128,
    den: u128,
}

impl Frac {
    fn less(self, other: Frac) -> bool {
        self.num * other.den < other.num * self.den
    }
}

struct Grower<'a, F, R> {
    index: &'a FeatureIndex<F>,
    y: &'a [u8],
    config: TreeConfig,
    sampler: Option<(&'a mut R, usize)>,
    hist: Vec<[usize; 2]>,
    pairs: Vec<(u32, u8)>,
    features: Vec<usize>,
}

impl<'a, F: Float, R: Rng> Grower<'a, F, R> {
    fn counts(&self, rows: &[usize]) -> [usize; 2] {
        let ones = rows.iter().filter(|&&r| self.y[r] == 1).count();
        [rows.len() - ones, ones]
    }

    fn grow(&mut self, rows: &mut [usize]) -> TreeNode<F> {
        let counts = self.counts(rows);
        let n = rows.len();
        if counts[0] == 0 || counts[1] == 0 || n < self.config.min_split || n < 2 * self.config.min_bucket {
            return TreeNode::leaf(counts);
        }
        self.pick_features();
        let Some((variable, rank)) = self.best_split(rows, counts) else {
            return TreeNode::leaf(counts);
        };
        let ranks = &self.index.ranks[variable];
        let mut mid = 0;
        for i in 0..n {
            if ranks[rows[i]] <= rank {
                rows.swap(i, mid);
                mid += 1;
            }
        }
        let threshold = self.index.values[variable][rank as usize];
        let (l, r) = rows.split_at_mut(mid);
        let left = Box::new(self.grow(l));
        let right = Box::new(self.grow(r));
        TreeNode::Split { variable, threshold, counts, left, right }
    }

    /// Fills `self.features` with the candidate variables for this node, ascending.
    fn pick_features(&mut self) {
        let p = self.index.n_features();
        self.features.clear();
        self.features.extend(0..p);
        if let Some((rng, mtry)) = self.sampler.as_mut() {
            let m = (*mtry).min(p);
            // partial Fisher-Yates: the first m slots are a uniform sample
            for i in 0..m {
                let j = rng.gen_range(i..p);
                self.features.swap(i, j);
            }
            self.features.truncate(m);
            self.features.sort_unstable();
        }
    }

    fn best_split(&mut self, rows: &[usize], counts: [usize; 2]) -> Option<(usize, u32)> {
        let n = rows.len();
        let min_bucket = self.config.min_bucket.max(1);
        // parent weighted impurity, p0 p1 / n
        let parent = Frac { num: (counts[0] * counts[1]) as u128, den: n as u128 };
        // growing to purity also takes zero-decrease splits (XOR-like nodes)
        let to_purity = self.config.min_split <= 2 && self.config.min_bucket <= 1;
        let mut best: Option<(Frac, usize, u32)> = None;
        let mut consider = |h: [usize; 2], left: &mut [usize; 2], f: usize, rank: u32| {
            left[0] += h[0];
            left[1] += h[1];
            let nl = left[0] + left[1];
            let nr = n - nl;
            if nl < min_bucket || nr < min_bucket {
                return;
            }
            let right = [counts[0] - left[0], counts[1] - left[1]];
            let score = Frac {
                num: (left[0] * left[1] * nr + right[0] * right[1] * nl) as u128,
                den: (nl * nr) as u128,
            };
            if (to_purity || score.less(parent)) && best.is_none_or(|(b, _, _)| score.less(b)) {
                best = Some((score, f, rank));
            }
        };
        for &f in &self.features {
            let ranks = &self.index.ranks[f];
            let n_distinct = self.index.values[f].len();
            let mut left = [0usize; 2];
            if n_distinct <= 4 * n {
                self.hist.clear();
                self.hist.resize(n_distinct, [0, 0]);
                let (mut lo, mut hi) = (u32::MAX, 0);
                for &r in rows {
                    let k = ranks[r];
                    self.hist[k as usize][self.y[r] as usize] += 1;
                    lo = lo.min(k);
                    hi = hi.max(k);
                }
                // the largest occupied rank cannot split
                for k in lo..hi {
                    let h = self.hist[k as usize];
                    if h[0] + h[1] > 0 {
                        consider(h, &mut left, f, k);
                    }
                }
            } else {
                self.pairs.clear();
                self.pairs.extend(rows.iter().map(|&r| (ranks[r], self.y[r])));
                self.pairs.sort_unstable_by_key(|p| p.0);
                let mut i = 0;
                while i < self.pairs.len() {
                    let k = self.pairs[i].0;
                    let mut h = [0, 0];
                    while i < self.pairs.len() && self.pairs[i].0 == k {
                        h[self.pairs[i].1 as usize] += 1;
                        i += 1;
                    }
                    if i < self.pairs.len() {
                        consider(h, &mut left, f, k);
                    }
                }
            }
        }
        best.map(|(_, f, r)| (f, r))
    }
}

pub(crate) fn grow_on_rows<F: Float, R: Rng>(
    index: &FeatureIndex<F>,
    y: &[u8],
    mut rows: Vec<usize>,
    config: TreeConfig,
    sampler: Option<(&mut R, usize)>,
) -> DecisionTree<F> {
    let n_train = rows.len();
    let mut grower = Grower {
        index,
        y,
        config,
        sampler,
        hist: Vec::new(),
        pairs: Vec::new(),
        features: Vec::new(),
    };
    let root = grower.grow(&mut rows);
    DecisionTree { root, config, n_train, n_features: index.n_features() }
}

/// Grows a tree on every row of `x`. Degenerate input yields a single leaf.
pub fn grow_tree<F: Float>(x: &Matrix<F>, y: &[u8], config: TreeConfig) -> DecisionTree<F> {
    assert_eq!(x.rows(), y.len(), "one label per row");
    let index = FeatureIndex::new(x);
    grow_on_rows::<F, rand::rngs::mock::StepRng>(&index, y, (0..x.rows()).collect(), config, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gini(c: [usize; 2]) -> f64 {
        let n = (c[0] + c[1]) as f64;
        if n == 0.0 {
            return 0.0;
        }
        1.0 - (c[0] as f64 / n).powi(2) - (c[1] as f64 / n).powi(2)
    }

    fn check_splits(node: &TreeNode<f64>) {
        if let TreeNode::Split { counts, left, right, .. } = node {
            let n = (counts[0] + counts[1]) as f64;
            let (lc, rc) = (left.counts(), right.counts());
            let child = (lc[0] + lc[1]) as f64 / n * gini(lc) + (rc[0] + rc[1]) as f64 / n * gini(rc);
            assert!(gini(*counts) - child > 0.0);
            check_splits(left);
            check_splits(right);
        }
    }

    #[test]
    fn single_separating_split() {
        let x = Matrix::from_rows(&[[1.0, 3.0], [2.0, 1.0], [3.0, 2.0], [4.0, 3.0], [2.0, 2.0], [5.0, 1.0]]);
        let y = [0, 0, 1, 1, 0, 1];
        let t = grow_tree(&x, &y, TreeConfig::fully_grown());
        match &t.root {
            TreeNode::Split { variable, threshold, left, right, .. } => {
                assert_eq!((*variable, *threshold), (0, 2.0));
                assert!(matches!(**left, TreeNode::Leaf { class: 0, .. }));
                assert!(matches!(**right, TreeNode::Leaf { class: 1, .. }));
            }
            _ => panic!("expected a split"),
        }
        assert_eq!(t.resubstitution_errors(&x, &y), 0);
    }

    #[test]
    fn threshold_value_goes_left() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0], [4.0]]);
        let t = grow_tree(&x, &[0, 0, 1, 1], TreeConfig::fully_grown());
        assert_eq!(t.predict(&[2.0]), 0);
        assert_eq!(t.predict(&[2.5]), 1);
    }

    #[test]
    fn conflicting_duplicates_make_a_tied_leaf() {
        let x = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]);
        let t = grow_tree(&x, &[0, 1], TreeConfig::fully_grown());
        assert_eq!(t.root, TreeNode::Leaf { class: 0, counts: [1, 1] });
    }

    #[test]
    fn ties_prefer_lower_variable_then_lower_threshold() {
        // both columns separate the labels identically
        let x = Matrix::from_rows(&[[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [4.0, 4.0]]);
        let t = grow_tree(&x, &[0, 0, 1, 1], TreeConfig::fully_grown());
        assert!(matches!(t.root, TreeNode::Split { variable: 0, .. }));
        // symmetric XOR-free case: splits at 1 and 3 have equal decrease; lower wins
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0], [4.0]]);
        let t = grow_tree(&x, &[0, 1, 1, 0], TreeConfig::fully_grown());
        assert!(matches!(t.root, TreeNode::Split { threshold, .. } if threshold == 1.0));
    }

    #[test]
    fn min_sizes_stop_growth() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0], [4.0]]);
        let t = grow_tree(&x, &[0, 0, 1, 1], TreeConfig { min_split: 5, min_bucket: 1 });
        assert_eq!(t.n_leaves(), 1);
        let t = grow_tree(&x, &[0, 1, 1, 1], TreeConfig { min_split: 1, min_bucket: 2 });
        // the only pure split (1 | 3) violates min_bucket; 2 | 2 still lowers impurity
        assert!(matches!(t.root, TreeNode::Split { threshold, .. } if threshold == 2.0));
    }

    #[test]
    fn xor_needs_a_zero_decrease_split() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]);
        let y = [0, 1, 1, 0];
        let full = grow_tree(&x, &y, TreeConfig::fully_grown());
        assert_eq!(full.resubstitution_errors(&x, &y), 0);
        assert!(matches!(full.root, TreeNode::Split { variable: 0, .. }));
        let cfg = TreeConfig { min_split: 4, min_bucket: 2 };
        assert_eq!(grow_tree(&x, &y, cfg).n_leaves(), 1);
    }

    #[test]
    fn fully_grown_on_distinct_rows_is_exact() {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..40u32 {
            let a = (i * 7 % 11) as f64;
            let b = (i * 3 % 13) as f64;
            rows.push([a, b, (i % 5) as f64]);
            y.push((i.wrapping_mul(2654435761u32) >> 7 & 1) as u8);
        }
        let x = Matrix::from_rows(&rows);
        let t = grow_tree(&x, &y, TreeConfig::fully_grown());
        assert_eq!(t.resubstitution_errors(&x, &y), 0);
        check_splits(&t.root);
    }

    #[test]
    fn missing_on_path_errors() {
        let x = Matrix::from_rows(&[[1.0, 5.0], [2.0, 5.0], [3.0, 5.0], [4.0, 5.0]]);
        let t = grow_tree(&x, &[0, 0, 1, 1], TreeConfig::fully_grown());
        assert!(t.try_predict(&[None, Some(5.0)]).is_err());
        assert_eq!(t.try_predict(&[Some(4.0), None]).unwrap(), 1);
    }

    #[test]
    fn serializes_as_nested_records() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0], [4.0]]);
        let t = grow_tree(&x, &[0, 0, 1, 1], TreeConfig::fully_grown());
        let json = t.to_json();
        assert!(json.contains("\"type\": \"split\""));
        let back: DecisionTree<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn works_in_single_precision() {
        let x = Matrix::from_rows(&[[1.0f32], [2.0], [3.0], [4.0]]);
        let t = grow_tree(&x, &[0, 0, 1, 1], TreeConfig::fully_grown());
        assert_eq!(t.predict_all(&x), vec![0, 0, 1, 1]);
    }
}
