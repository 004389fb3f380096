//! The nine classifier configurations behind one fit/predict contract.

mod discriminant;
mod knn;
mod logistic;
mod svm;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use discriminant::*;
pub use knn::*;
pub use logistic::*;
pub use svm::*;

use crate::error::{Error, Result};
use crate::num::{Float, Matrix};
use crate::trees::{
    fit_forest, grow_tree, optimize_mtry, prune, pruning_path, DecisionTree, ForestConfig, MtryObjective, PruneRule,
    RandomForest, TreeConfig, DEFAULT_TREES,
};

/// Row indices of class 0 and class 1; errors if either is empty.
pub(crate) fn split_classes(y: &[u8]) -> Result<[Vec<usize>; 2]> {
    let ones: Vec<usize> = (0..y.len()).filter(|&r| y[r] == 1).collect();
    let zeros: Vec<usize> = (0..y.len()).filter(|&r| y[r] != 1).collect();
    if zeros.is_empty() {
        return Err(Error::MissingClass(0));
    }
    if ones.is_empty() {
        return Err(Error::MissingClass(1));
    }
    Ok([zeros, ones])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    DecisionTree1,
    DecisionTree2,
    Lda,
    Qda,
    RandomForest,
    LogisticRegression,
    Svm1,
    Svm2,
    Knn,
}

impl Method {
    /// Report order.
    pub const ALL: [Method; 9] = [
        Method::DecisionTree1,
        Method::DecisionTree2,
        Method::Lda,
        Method::Qda,
        Method::RandomForest,
        Method::LogisticRegression,
        Method::Svm1,
        Method::Svm2,
        Method::Knn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::DecisionTree1 => "Decision Tree 1",
            Method::DecisionTree2 => "Decision Tree 2",
            Method::Lda => "LDA",
            Method::Qda => "QDA",
            Method::RandomForest => "Random Forests",
            Method::LogisticRegression => "Logistic Regression",
            Method::Svm1 => "SVM 1",
            Method::Svm2 => "SVM 2",
            Method::Knn => "k-NN",
        }
    }

    /// Short command-line token.
    pub fn token(self) -> &'static str {
        match self {
            Method::DecisionTree1 => "tree1",
            Method::DecisionTree2 => "tree2",
            Method::Lda => "lda",
            Method::Qda => "qda",
            Method::RandomForest => "forest",
            Method::LogisticRegression => "logistic",
            Method::Svm1 => "svm1",
            Method::Svm2 => "svm2",
            Method::Knn => "knn",
        }
    }

    /// k-NN has no resubstitution row: with `k = 1` it would trivially be zero.
    pub fn has_resubstitution(self) -> bool {
        self != Method::Knn
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.token() == key || m.name().to_ascii_lowercase() == key)
            .ok_or_else(|| {
                let known: Vec<&str> = Method::ALL.iter().map(|m| m.token()).collect();
                Error::InvalidArgument(format!("unknown method `{s}` (expected one of {})", known.join(", ")))
            })
    }
}

/// Knobs shared by every fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    /// Folds for internal tuning: pruning, mtry and k.
    pub folds: usize,
    pub n_trees: usize,
    /// Forest size while enumerating mtry.
    pub tuning_trees: usize,
    pub mtry_objective: MtryObjective,
    pub tree: TreeConfig,
    pub logistic: LogisticConfig,
    pub k_candidates: Vec<usize>,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings {
            folds: 10,
            n_trees: DEFAULT_TREES,
            tuning_trees: DEFAULT_TREES,
            mtry_objective: MtryObjective::CrossValidation,
            tree: TreeConfig::default(),
            logistic: LogisticConfig::default(),
            k_candidates: default_k_candidates(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", content = "model", rename_all = "kebab-case")]
#[serde(bound = "")]
pub enum ClassifierModel<F: Float> {
    DecisionTree1(DecisionTree<F>),
    DecisionTree2(DecisionTree<F>),
    Lda(LdaModel<F>),
    Qda(QdaModel<F>),
    RandomForest(RandomForest<F>),
    LogisticRegression(LogisticModel<F>),
    Svm1(SvmModel<F>),
    Svm2(SvmModel<F>),
    Knn(KnnModel<F>),
}

impl<F: Float> ClassifierModel<F> {
    pub fn method(&self) -> Method {
        match self {
            ClassifierModel::DecisionTree1(_) => Method::DecisionTree1,
            ClassifierModel::DecisionTree2(_) => Method::DecisionTree2,
            ClassifierModel::Lda(_) => Method::Lda,
            ClassifierModel::Qda(_) => Method::Qda,
            ClassifierModel::RandomForest(_) => Method::RandomForest,
            ClassifierModel::LogisticRegression(_) => Method::LogisticRegression,
            ClassifierModel::Svm1(_) => Method::Svm1,
            ClassifierModel::Svm2(_) => Method::Svm2,
            ClassifierModel::Knn(_) => Method::Knn,
        }
    }

    pub fn predict(&self, row: &[F]) -> u8 {
        match self {
            ClassifierModel::DecisionTree1(m) | ClassifierModel::DecisionTree2(m) => m.predict(row),
            ClassifierModel::Lda(m) => m.predict(row),
            ClassifierModel::Qda(m) => m.predict(row),
            ClassifierModel::RandomForest(m) => m.predict(row),
            ClassifierModel::LogisticRegression(m) => m.predict(row),
            ClassifierModel::Svm1(m) | ClassifierModel::Svm2(m) => m.predict(row),
            ClassifierModel::Knn(m) => m.predict(row),
        }
    }

    pub fn predict_all(&self, x: &Matrix<F>) -> Vec<u8> {
        (0..x.rows()).map(|r| self.predict(x.row(r))).collect()
    }

    /// Class-1 probability, for the methods that provide one.
    pub fn probability(&self, row: &[F]) -> Option<F> {
        match self {
            ClassifierModel::LogisticRegression(m) => Some(m.probability(row)),
            ClassifierModel::RandomForest(m) => Some(m.probability(row)),
            _ => None,
        }
    }

    /// Fitted hyperparameters and numerical caveats worth reporting.
    pub fn notes(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            ClassifierModel::DecisionTree1(t) | ClassifierModel::DecisionTree2(t) => {
                out.push(format!("{} leaves", t.n_leaves()))
            }
            ClassifierModel::Lda(m) if m.ridge.is_some() => out.push("ridge added to covariance".into()),
            ClassifierModel::Qda(m) if m.ridged() => out.push("ridge added to covariance".into()),
            ClassifierModel::RandomForest(m) => out.push(format!("mtry = {}", m.config.mtry)),
            ClassifierModel::LogisticRegression(m) if !m.converged => {
                out.push(format!("IRLS not converged after {} iterations", m.iterations))
            }
            ClassifierModel::Svm1(m) | ClassifierModel::Svm2(m) => {
                out.push(format!("gamma = {:.4}, {} support vectors", m.gamma.as_f64(), m.support.len()))
            }
            ClassifierModel::Knn(m) => out.push(format!("k = {}", m.k)),
            _ => {}
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }
}

/// Fits one configuration, running its internal tuning (pruning, mtry, k) on
/// `(x, y)` with generators drawn from `rng`.
pub fn fit_method<F: Float, R: Rng + ?Sized>(
    method: Method,
    x: &Matrix<F>,
    y: &[u8],
    settings: &FitSettings,
    rng: &mut R,
) -> Result<ClassifierModel<F>> {
    split_classes(y)?;
    if x.rows() != y.len() {
        return Err(Error::InvalidArgument(format!("{} rows but {} labels", x.rows(), y.len())));
    }
    Ok(match method {
        Method::DecisionTree1 | Method::DecisionTree2 => {
            let tree = grow_tree(x, y, settings.tree);
            let path = pruning_path(&tree, x, y);
            let rule = if method == Method::DecisionTree1 { PruneRule::MinError } else { PruneRule::OneStandardError };
            let pruned = prune(&path, x, y, rule, settings.folds, rng);
            if method == Method::DecisionTree1 {
                ClassifierModel::DecisionTree1(pruned)
            } else {
                ClassifierModel::DecisionTree2(pruned)
            }
        }
        Method::Lda => ClassifierModel::Lda(fit_lda(x, y)?),
        Method::Qda => ClassifierModel::Qda(fit_qda(x, y)?),
        Method::RandomForest => {
            let choice = optimize_mtry(x, y, settings.tuning_trees, settings.mtry_objective, rng)?;
            ClassifierModel::RandomForest(fit_forest(x, y, ForestConfig::new(settings.n_trees, choice.mtry), rng)?)
        }
        Method::LogisticRegression => ClassifierModel::LogisticRegression(fit_logistic(x, y, settings.logistic)?),
        Method::Svm1 => ClassifierModel::Svm1(fit_svm(x, y, SvmConfig::new(SvmVariant::MedianHeuristic), rng)?),
        Method::Svm2 => ClassifierModel::Svm2(fit_svm(x, y, SvmConfig::new(SvmVariant::InverseDimension), rng)?),
        Method::Knn => {
            let choice = optimize_k(x, y, &settings.k_candidates, settings.folds.min(y.len()), rng)?;
            ClassifierModel::Knn(fit_knn(x, y, choice.k)?)
        }
    })
}
