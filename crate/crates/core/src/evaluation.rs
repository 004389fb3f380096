//! Resubstitution and stratified cross-validation of the classifier
//! configurations, the majority baseline, and report rendering.
//!
//! Randomness: the fold assignment comes from stream 0 of the seed. The fit for
//! method `m` on fold `f` draws from stream `(m + 1) << 32 | f`, and the full-data
//! fit from the same stream with `f = u32::MAX`, so running a subset of methods
//! reproduces their rows exactly.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::association::{md_escape, select_variables, SelectionRule};
use crate::classifiers::{fit_method, ClassifierModel, FitSettings, Method};
use crate::dataset::{normalize_columns, Dataset, NormalizationParams, RowIndexSet};
use crate::error::{Error, Result};
use crate::folds::{stratified_folds, FoldAssignment};
use crate::num::{Float, Matrix};
use crate::trees::MtryObjective;

/// Anything that labels a fully observed row.
pub trait Predictor<F: Float> {
    fn predict(&self, row: &[F]) -> u8;
}

impl<F: Float> Predictor<F> for ClassifierModel<F> {
    fn predict(&self, row: &[F]) -> u8 {
        ClassifierModel::predict(self, row)
    }
}

/// A model fitted on a subset of the matrix columns.
struct OnColumns<F: Float> {
    model: ClassifierModel<F>,
    cols: Vec<usize>,
}

impl<F: Float> Predictor<F> for OnColumns<F> {
    fn predict(&self, row: &[F]) -> u8 {
        let sub: Vec<F> = self.cols.iter().map(|&c| row[c]).collect();
        self.model.predict(&sub)
    }
}

/// Share of the larger class: the accuracy of always predicting it.
pub fn majority_baseline(y: &[u8]) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    let ones = y.iter().filter(|&&v| v == 1).count();
    ones.max(y.len() - ones) as f64 / y.len() as f64
}

fn error_rate<F: Float, P: Predictor<F> + ?Sized>(model: &P, x: &Matrix<F>, y: &[u8], rows: &[usize]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let wrong = rows.iter().filter(|&&r| model.predict(x.row(r)) != y[r]).count();
    wrong as f64 / rows.len() as f64
}

/// Generator for one fit of one method.
pub fn fit_rng(seed: u64, method: Method, slot: u32) -> ChaCha8Rng {
    let index = Method::ALL.iter().position(|&m| m == method).expect("known method") as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((index + 1) << 32) | u64::from(slot));
    rng
}

const FULL_DATA_SLOT: u32 = u32::MAX;

/// Fits on every row and returns the model with its misclassification rate on those rows.
pub fn resubstitution_error<F: Float>(
    method: Method,
    x: &Matrix<F>,
    y: &[u8],
    settings: &FitSettings,
    seed: u64,
) -> Result<(ClassifierModel<F>, f64)> {
    let mut rng = fit_rng(seed, method, FULL_DATA_SLOT);
    let model = fit_method(method, x, y, settings, &mut rng)?;
    let all: Vec<usize> = (0..y.len()).collect();
    let e = error_rate(&model, x, y, &all);
    Ok((model, e))
}

/// Per-fold error rates of models produced by `fit(fold, training_rows)`,
/// each scored on its held-out fold.
pub fn cross_validate_with<F, M, Fit>(x: &Matrix<F>, y: &[u8], folds: &FoldAssignment, fit: Fit) -> Result<Vec<(f64, M)>>
where
    F: Float,
    M: Predictor<F> + Send,
    Fit: Fn(usize, &[usize]) -> Result<M> + Sync,
{
    if folds.n_rows() != y.len() {
        return Err(Error::InvalidArgument(format!("fold assignment covers {} rows, data has {}", folds.n_rows(), y.len())));
    }
    (0..folds.k)
        .into_par_iter()
        .map(|f| {
            let train = folds.train_rows(f);
            let model = fit(f, &train)?;
            Ok((error_rate(&model, x, y, &folds.test_rows(f)), model))
        })
        .collect()
}

/// Sample mean and standard deviation (divisor `k - 1`).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let k = values.len();
    if k == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    if k < 2 {
        return (mean, 0.0);
    }
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / (k - 1) as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub resubstitution: Option<f64>,
    pub cv_mean: Option<f64>,
    pub cv_std: Option<f64>,
    pub fold_errors: Vec<f64>,
    /// Fitted hyperparameters: the full-data fit first, then one entry per fold.
    pub hyperparameters: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub rows: usize,
    pub pass: usize,
    pub predictors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub dataset: DatasetSummary,
    pub selected: Vec<String>,
    pub selection_in_folds: bool,
    pub results: Vec<MethodResult>,
    /// Majority-class accuracy.
    pub baseline_accuracy: f64,
    pub best_resubstitution: Vec<Method>,
    pub best_cv: Vec<Method>,
    pub folds: FoldAssignment,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationConfig {
    pub name: String,
    pub folds: usize,
    pub seed: u64,
    pub fit: FitSettings,
    pub rule: SelectionRule,
    /// Re-run variable selection inside every training fold instead of once.
    pub select_in_folds: bool,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            name: "dataset".into(),
            folds: 10,
            seed: 0,
            fit: FitSettings::default(),
            rule: SelectionRule::default(),
            select_in_folds: false,
        }
    }
}

fn selected_columns(dataset: &Dataset, rule: SelectionRule, predictors: &[usize]) -> Result<Vec<usize>> {
    let chosen = select_variables(dataset, rule)?;
    let mut cols: Vec<usize> = predictors
        .iter()
        .enumerate()
        .filter(|(_, &c)| chosen.iter().any(|a| a.selected && a.variable == dataset.schema().variables[c].name))
        .map(|(j, _)| j)
        .collect();
    cols.sort_unstable();
    Ok(cols)
}

/// Runs the requested methods with resubstitution (where defined) and
/// stratified k-fold cross-validation. Features are the predictors standardized
/// on the full data; variable selection runs once up front unless
/// `select_in_folds` is set. A failing method leaves empty cells and a
/// diagnostic; it does not stop the others.
pub fn run_benchmark<F: Float>(dataset: &Dataset, methods: &[Method], config: &EvaluationConfig) -> Result<EvaluationReport> {
    if !dataset.is_labeled() {
        return Err(Error::InvalidArgument("evaluation needs the outcome column".into()));
    }
    if dataset.has_missing() {
        return Err(Error::InvalidArgument(format!("{} missing cells; impute first", dataset.missing_count())));
    }
    let y = dataset.labels();
    let predictors = dataset.schema().predictor_indices();
    let (z, _) = normalize_columns::<F>(dataset, &predictors)?;
    let x = z.complete().expect("complete dataset");

    let full_cols = selected_columns(dataset, config.rule, &predictors)?;
    if full_cols.is_empty() && !config.select_in_folds {
        return Err(Error::InsufficientData("no variable passed the selection rule".into()));
    }
    let mut rng0 = ChaCha8Rng::seed_from_u64(config.seed);
    let folds = stratified_folds(&y, config.folds, &mut rng0)?;
    for f in 0..folds.k {
        let train: Vec<u8> = folds.train_rows(f).iter().map(|&r| y[r]).collect();
        if !train.contains(&0) || !train.contains(&1) {
            return Err(Error::MissingClass(u8::from(!train.contains(&1))));
        }
    }

    let fold_cols: Vec<Vec<usize>> = if config.select_in_folds {
        (0..folds.k)
            .map(|f| {
                let train = RowIndexSet::new(folds.train_rows(f), y.len())?;
                selected_columns(&dataset.subset_rows(&train), config.rule, &predictors)
            })
            .collect::<Result<_>>()?
    } else {
        vec![full_cols.clone(); folds.k]
    };

    let mut results = Vec::new();
    for &method in methods {
        let start = Instant::now();
        let mut res = MethodResult {
            method,
            resubstitution: None,
            cv_mean: None,
            cv_std: None,
            fold_errors: Vec::new(),
            hyperparameters: Vec::new(),
            failure: None,
            seconds: 0.0,
        };
        let mut failures = Vec::new();
        if method.has_resubstitution() && !full_cols.is_empty() {
            let resub_settings = FitSettings { mtry_objective: MtryObjective::Resubstitution, ..config.fit.clone() };
            match resubstitution_error(method, &x.select_cols(&full_cols), &y, &resub_settings, config.seed) {
                Ok((model, e)) => {
                    res.resubstitution = Some(e);
                    let notes = model.notes();
                    if !notes.is_empty() {
                        res.hyperparameters.push(format!("full data: {}", notes.join(", ")));
                    }
                }
                Err(e) => failures.push(format!("resubstitution: {e}")),
            }
        }
        let cv = cross_validate_with(&x, &y, &folds, |f, train| {
            let cols = &fold_cols[f];
            if cols.is_empty() {
                return Err(Error::InsufficientData(format!("fold {}: no variable passed selection", f + 1)));
            }
            let xt = x.select_rows(train).select_cols(cols);
            let yt: Vec<u8> = train.iter().map(|&r| y[r]).collect();
            let mut rng = fit_rng(config.seed, method, f as u32);
            let model = fit_method(method, &xt, &yt, &config.fit, &mut rng)?;
            Ok(OnColumns { model, cols: cols.clone() })
        });
        match cv {
            Ok(per_fold) => {
                for (f, (_, m)) in per_fold.iter().enumerate() {
                    let notes = m.model.notes();
                    if !notes.is_empty() {
                        res.hyperparameters.push(format!("fold {}: {}", f + 1, notes.join(", ")));
                    }
                }
                res.fold_errors = per_fold.into_iter().map(|(e, _)| e).collect();
                let (mean, std) = mean_std(&res.fold_errors);
                res.cv_mean = Some(mean);
                res.cv_std = Some(std);
            }
            Err(e) => failures.push(format!("cross-validation: {e}")),
        }
        if !failures.is_empty() {
            res.failure = Some(failures.join("; "));
        }
        res.seconds = start.elapsed().as_secs_f64();
        results.push(res);
    }

    let best = |get: &dyn Fn(&MethodResult) -> Option<f64>| -> Vec<Method> {
        let min = results.iter().filter_map(get).fold(f64::INFINITY, f64::min);
        results.iter().filter(|r| get(r) == Some(min)).map(|r| r.method).collect()
    };
    let best_resubstitution = best(&|r| r.resubstitution);
    let best_cv = best(&|r| r.cv_mean);
    let pass = y.iter().filter(|&&v| v == 1).count();
    Ok(EvaluationReport {
        dataset: DatasetSummary { name: config.name.clone(), rows: y.len(), pass, predictors: predictors.len() },
        selected: full_cols.iter().map(|&j| dataset.schema().variables[predictors[j]].name.clone()).collect(),
        selection_in_folds: config.select_in_folds,
        results,
        baseline_accuracy: majority_baseline(&y),
        best_resubstitution,
        best_cv,
        folds,
        seed: config.seed,
    })
}

fn pct(e: f64) -> String {
    format!("{:.2}", 100.0 * e)
}

impl EvaluationReport {
    pub fn any_failed(&self) -> bool {
        self.results.iter().any(|r| r.failure.is_some())
    }

    pub fn result(&self, method: Method) -> Option<&MethodResult> {
        self.results.iter().find(|r| r.method == method)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_markdown(&self) -> String {
        let d = &self.dataset;
        let mut s = format!(
            "## {}\n\n{} students, {} pass ({:.2}%). Selected variables ({}): {}.\n",
            md_escape(&d.name),
            d.rows,
            d.pass,
            100.0 * d.pass as f64 / d.rows.max(1) as f64,
            self.selected.len(),
            self.selected.iter().map(|v| md_escape(v)).collect::<Vec<_>>().join(", ")
        );
        if self.selection_in_folds {
            s.push_str("Cross-validation repeats variable selection inside every training fold.\n");
        }
        let bold = |text: String, best: bool| if best { format!("**{text}**") } else { text };

        let resub: Vec<&MethodResult> = self.results.iter().filter(|r| r.method.has_resubstitution()).collect();
        if !resub.is_empty() {
            s.push_str("\n### Resubstitution error (%)\n\n| Method | Error |\n|---|---:|\n");
            for r in resub {
                let cell = r
                    .resubstitution
                    .map_or("—".to_string(), |e| bold(pct(e), self.best_resubstitution.contains(&r.method)));
                s.push_str(&format!("| {} | {} |\n", r.method, cell));
            }
        }
        s.push_str(&format!("\n### Cross-validation error (%), {}-fold\n\n| Method | Error |\n|---|---:|\n", self.folds.k));
        for r in &self.results {
            let cell = match (r.cv_mean, r.cv_std) {
                (Some(m), Some(sd)) => bold(format!("{} ± {}", pct(m), pct(sd)), self.best_cv.contains(&r.method)),
                _ => "—".to_string(),
            };
            s.push_str(&format!("| {} | {} |\n", r.method, cell));
        }
        s.push_str(&format!(
            "\nMajority baseline: {}% correct classification ({}% error).\n",
            pct(self.baseline_accuracy),
            pct(1.0 - self.baseline_accuracy)
        ));
        let failed: Vec<&MethodResult> = self.results.iter().filter(|r| r.failure.is_some()).collect();
        if !failed.is_empty() {
            s.push_str("\n### Failures\n\n");
            for r in failed {
                s.push_str(&format!("- {}: {}\n", r.method, r.failure.as_deref().unwrap_or_default()));
            }
        }
        s
    }
}

/// A method fitted on every row of a complete dataset, with the selection and
/// standardization needed to score new students.
#[derive(Debug, Clone)]
pub struct TrainedClassifier<F: Float> {
    pub model: ClassifierModel<F>,
    pub selected: Vec<String>,
    pub scaling: NormalizationParams<F>,
    /// Misclassification rate of `model` on its own training rows.
    pub training_error: f64,
}

impl<F: Float> TrainedClassifier<F> {
    /// Standardized selected columns of `dataset`, which must share the training schema.
    pub fn features(&self, dataset: &Dataset) -> Result<Matrix<F>> {
        for (&c, name) in self.scaling.columns.iter().zip(&self.scaling.names) {
            if dataset.schema().variables.get(c).map(|v| &v.name) != Some(name) {
                return Err(Error::UnknownVariable(name.clone()));
            }
        }
        self.scaling
            .apply(dataset)
            .complete()
            .ok_or_else(|| Error::InvalidArgument("selected columns have missing cells; impute first".into()))
    }

    pub fn predict(&self, dataset: &Dataset) -> Result<Vec<u8>> {
        Ok(self.model.predict_all(&self.features(dataset)?))
    }

    /// Class-1 probabilities, for the methods that provide one.
    pub fn probabilities(&self, dataset: &Dataset) -> Result<Option<Vec<F>>> {
        let x = self.features(dataset)?;
        Ok((0..x.rows()).map(|r| self.model.probability(x.row(r))).collect())
    }
}

/// Selects variables and fits `method` on the whole dataset with the same
/// generator a benchmark uses for its full-data fit.
pub fn train_classifier<F: Float>(dataset: &Dataset, method: Method, config: &EvaluationConfig) -> Result<TrainedClassifier<F>> {
    if !dataset.is_labeled() {
        return Err(Error::InvalidArgument("training needs the outcome column".into()));
    }
    if dataset.has_missing() {
        return Err(Error::InvalidArgument(format!("{} missing cells; impute first", dataset.missing_count())));
    }
    let predictors = dataset.schema().predictor_indices();
    let cols: Vec<usize> = selected_columns(dataset, config.rule, &predictors)?.iter().map(|&j| predictors[j]).collect();
    if cols.is_empty() {
        return Err(Error::InsufficientData("no variable passed the selection rule".into()));
    }
    let (z, scaling) = normalize_columns::<F>(dataset, &cols)?;
    let x = z.complete().expect("complete dataset");
    let (model, training_error) = resubstitution_error(method, &x, &dataset.labels(), &config.fit, config.seed)?;
    let selected = cols.iter().map(|&c| dataset.schema().variables[c].name.clone()).collect();
    Ok(TrainedClassifier { model, selected, scaling, training_error })
}
