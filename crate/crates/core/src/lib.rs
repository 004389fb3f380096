//! Predicting first-year academic success from questionnaire data.
//!
//! The pipeline reads a schema-typed CSV table, imputes missing answers from
//! nearest neighbours, screens predictors with chi-squared and Spearman tests,
//! and benchmarks nine classifiers by stratified cross-validation. Numeric
//! code is generic over `f32` and `f64`; the aliases below fix `f64`.

pub mod association;
pub mod classifiers;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod folds;
pub mod imputation;
pub mod linalg;
pub mod num;
pub mod special;
pub mod synth;
pub mod trees;

pub use dataset::{load_dataset, Cell, Dataset, Schema, VariableKind, VariableSpec};
pub use error::{Error, Result};

pub type Matrix = num::Matrix<f64>;
pub type ChiSquared = association::ChiSquared<f64>;
pub type NormalizationParams = dataset::NormalizationParams<f64>;
pub type ImputationLog = imputation::ImputationLog<f64>;
pub type DecisionTree = trees::DecisionTree<f64>;
pub type PruningPath = trees::PruningPath<f64>;
pub type RandomForest = trees::RandomForest<f64>;
pub type LdaModel = classifiers::LdaModel<f64>;
pub type QdaModel = classifiers::QdaModel<f64>;
pub type LogisticModel = classifiers::LogisticModel<f64>;
pub type SvmModel = classifiers::SvmModel<f64>;
pub type KnnModel = classifiers::KnnModel<f64>;
pub type ClassifierModel = classifiers::ClassifierModel<f64>;
