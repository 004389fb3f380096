//! Nearest-neighbour median imputation.
//!
//! Each missing cell takes the lower median of the target column over the `k`
//! most similar rows in which that column is observed. Similarity is Euclidean
//! distance on standardized non-outcome columns, computed over the dimensions
//! both rows observe and rescaled by `sqrt(p / d)`. All cells are imputed from
//! the original table, so the order of imputation does not matter.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{standardize_raw, Cell, Dataset};
use crate::error::{Error, Result};
use crate::num::{Float, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImputationConfig {
    /// Number of neighbours whose median replaces a missing cell.
    pub k: usize,
}

impl Default for ImputationConfig {
    fn default() -> Self {
        ImputationConfig { k: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ImputedCell<F: Float> {
    pub row: usize,
    pub column: usize,
    pub variable: String,
    pub value: Cell,
    /// Neighbour rows, nearest first.
    pub neighbors: Vec<usize>,
    pub distances: Vec<F>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ImputationLog<F: Float> {
    pub entries: Vec<ImputedCell<F>>,
}

impl<F: Float> ImputationLog<F> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("log serializes")
    }
}

/// Distance between two rows of a standardized matrix over their co-observed
/// columns, scaled by `sqrt(p / d)`.
pub fn row_distance<F: Float>(m: &Matrix<Option<F>>, a: usize, b: usize) -> Result<F> {
    scaled_distance(m.row(a), m.row(b))
        .ok_or_else(|| Error::Undefined(format!("rows {a} and {b} share no observed column")))
}

fn scaled_distance<F: Float>(a: &[Option<F>], b: &[Option<F>]) -> Option<F> {
    let mut sum = F::zero();
    let mut d = 0usize;
    for (x, y) in a.iter().zip(b) {
        if let (Some(x), Some(y)) = (x, y) {
            let diff = *x - *y;
            sum = sum + diff * diff;
            d += 1;
        }
    }
    if d == 0 {
        return None;
    }
    if d == a.len() {
        Some(sum.sqrt())
    } else {
        Some((sum * F::from_count(a.len()) / F::from_count(d)).sqrt())
    }
}

/// Fills every missing non-outcome cell. Observed cells are left untouched.
pub fn impute_missing<F: Float>(dataset: &Dataset, config: ImputationConfig) -> Result<(Dataset, ImputationLog<F>)> {
    if config.k == 0 {
        return Err(Error::InvalidArgument("imputation needs k >= 1".into()));
    }
    let cols = dataset.schema().feature_indices();
    let n = dataset.n_rows();
    for &c in &cols {
        if n > 0 && (0..n).all(|r| dataset.cell(r, c).is_missing()) {
            return Err(Error::EmptyColumn(dataset.schema().variables[c].name.clone()));
        }
    }
    if !dataset.has_missing() {
        return Ok((dataset.clone(), ImputationLog::default()));
    }
    let (z, _) = standardize_raw::<F>(dataset, &cols, false)?;

    let incomplete: Vec<usize> = (0..n).filter(|&r| cols.iter().any(|&c| dataset.cell(r, c).is_missing())).collect();

    let per_row: Vec<Result<Vec<ImputedCell<F>>>> =
        incomplete.par_iter().map(|&r| impute_row(dataset, &z, &cols, r, config.k)).collect();

    let mut entries = Vec::new();
    for row in per_row {
        entries.extend(row?);
    }
    let updates: Vec<(usize, usize, Cell)> = entries.iter().map(|e| (e.row, e.column, e.value)).collect();
    let completed = dataset.with_cells(&updates)?;
    Ok((completed, ImputationLog { entries }))
}

fn impute_row<F: Float>(
    dataset: &Dataset,
    z: &Matrix<Option<F>>,
    cols: &[usize],
    r: usize,
    k: usize,
) -> Result<Vec<ImputedCell<F>>> {
    let n = dataset.n_rows();
    let dist: Vec<Option<F>> =
        (0..n).map(|j| if j == r { None } else { scaled_distance(z.row(r), z.row(j)) }).collect();
    let mut out = Vec::new();
    for &c in cols {
        if !dataset.cell(r, c).is_missing() {
            continue;
        }
        let mut cand: Vec<(F, usize)> = (0..n)
            .filter(|&j| !dataset.cell(j, c).is_missing())
            .filter_map(|j| dist[j].map(|d| (d, j)))
            .collect();
        let name = &dataset.schema().variables[c].name;
        if cand.is_empty() {
            return Err(Error::InsufficientData(format!(
                "row {r}, column `{name}`: no row with this column observed shares an observed column"
            )));
        }
        cand.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
        cand.truncate(k);
        let mut values: Vec<Cell> = cand.iter().map(|&(_, j)| dataset.cell(j, c)).collect();
        values.sort_by(|a, b| a.as_f64().partial_cmp(&b.as_f64()).unwrap_or(Ordering::Equal));
        let value = values[values.len().div_ceil(2) - 1];
        out.push(ImputedCell {
            row: r,
            column: c,
            variable: name.clone(),
            value,
            neighbors: cand.iter().map(|&(_, j)| j).collect(),
            distances: cand.iter().map(|&(d, _)| d).collect(),
        });
    }
    Ok(out)
}
