//! Schema-typed questionnaire tables.
//!
//! A dataset is a CSV file (header row, comma separated, `NA` for a missing
//! cell) paired with a JSON schema sidecar that lists every column in CSV
//! order:
//!
//! ```json
//! { "variables": [
//!     { "name": "attendance", "kind": "ordinal-discrete", "levels": [1, 2, 3, 4, 5],
//!       "role": "predictor", "missing_allowed": true },
//!     { "name": "success", "kind": "binary", "levels": [0, 1], "role": "outcome" }
//! ] }
//! ```
//!
//! Standardization and equal-frequency discretization live here too.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{Float, Matrix};

pub const MISSING_MARKER: &str = "NA";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariableKind {
    OrdinalDiscrete,
    Binary,
    ContinuousRaw,
}

impl VariableKind {
    pub fn is_discrete(self) -> bool {
        !matches!(self, VariableKind::ContinuousRaw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Predictor,
    Outcome,
    Excluded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub kind: VariableKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<i64>,
    pub role: Role,
    #[serde(default)]
    pub missing_allowed: bool,
}

impl VariableSpec {
    pub fn predictor(name: impl Into<String>, levels: Vec<i64>) -> Self {
        VariableSpec {
            name: name.into(),
            kind: if levels.len() == 2 { VariableKind::Binary } else { VariableKind::OrdinalDiscrete },
            levels,
            role: Role::Predictor,
            missing_allowed: true,
        }
    }

    pub fn continuous(name: impl Into<String>) -> Self {
        VariableSpec {
            name: name.into(),
            kind: VariableKind::ContinuousRaw,
            levels: Vec::new(),
            role: Role::Predictor,
            missing_allowed: true,
        }
    }

    pub fn outcome(name: impl Into<String>) -> Self {
        VariableSpec {
            name: name.into(),
            kind: VariableKind::Binary,
            levels: vec![0, 1],
            role: Role::Outcome,
            missing_allowed: false,
        }
    }

    /// Smallest and largest declared level, for discrete kinds.
    pub fn level_range(&self) -> Option<(i64, i64)> {
        Some((*self.levels.first()?, *self.levels.last()?))
    }

    fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Schema("variable with an empty name".into()));
        }
        match self.kind {
            VariableKind::ContinuousRaw => {
                if !self.levels.is_empty() {
                    return Err(Error::Schema(format!("continuous variable `{}` declares levels", self.name)));
                }
            }
            VariableKind::OrdinalDiscrete | VariableKind::Binary => {
                if self.levels.len() < 2 {
                    return Err(Error::Schema(format!("variable `{}` needs at least two levels", self.name)));
                }
                if self.levels.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Schema(format!("levels of `{}` must be strictly increasing", self.name)));
                }
                if self.kind == VariableKind::Binary && self.levels.len() != 2 {
                    return Err(Error::Schema(format!("binary variable `{}` must have exactly two levels", self.name)));
                }
            }
        }
        if self.role == Role::Outcome && (self.kind != VariableKind::Binary || self.levels != [0, 1]) {
            return Err(Error::Schema(format!("outcome `{}` must be binary with levels [0, 1]", self.name)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub variables: Vec<VariableSpec>,
}

impl Schema {
    pub fn new(variables: Vec<VariableSpec>) -> Result<Self> {
        let schema = Schema { variables };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_json<R: Read>(reader: R) -> Result<Self> {
        let schema: Schema = serde_json::from_reader(reader)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for v in &self.variables {
            v.validate()?;
            if !seen.insert(v.name.as_str()) {
                return Err(Error::Schema(format!("duplicate variable `{}`", v.name)));
            }
        }
        let outcomes = self.variables.iter().filter(|v| v.role == Role::Outcome).count();
        if outcomes != 1 {
            return Err(Error::Schema(format!("expected exactly one outcome variable, found {outcomes}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn outcome_index(&self) -> usize {
        self.variables.iter().position(|v| v.role == Role::Outcome).expect("validated schema has an outcome")
    }

    pub fn predictor_indices(&self) -> Vec<usize> {
        self.indices_with_role(Role::Predictor)
    }

    fn indices_with_role(&self, role: Role) -> Vec<usize> {
        self.variables.iter().enumerate().filter(|(_, v)| v.role == role).map(|(i, _)| i).collect()
    }

    /// Every column except the outcome.
    pub fn feature_indices(&self) -> Vec<usize> {
        let o = self.outcome_index();
        (0..self.len()).filter(|&i| i != o).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Level(i64),
    Real(f64),
    Missing,
}

impl Cell {
    pub fn is_missing(self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn as_f64(self) -> Option<f64> {
        match self {
            Cell::Level(l) => Some(l as f64),
            Cell::Real(x) => Some(x),
            Cell::Missing => None,
        }
    }

    fn render(self, out: &mut String) {
        match self {
            Cell::Level(l) => write!(out, "{l}").unwrap(),
            Cell::Real(x) => write!(out, "{x}").unwrap(),
            Cell::Missing => out.push_str(MISSING_MARKER),
        }
    }
}

/// Ordered, duplicate-free row indices into a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowIndexSet(Vec<usize>);

impl RowIndexSet {
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        let mut seen = vec![false; n];
        for &i in &indices {
            if i >= n {
                return Err(Error::InvalidArgument(format!("row index {i} out of range for {n} rows")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidArgument(format!("row index {i} repeated")));
            }
        }
        Ok(RowIndexSet(indices))
    }

    pub fn all(n: usize) -> Self {
        RowIndexSet((0..n).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    rows: Vec<Vec<Cell>>,
    labeled: bool,
}

impl Dataset {
    /// Builds a labeled dataset, checking every cell against the schema.
    pub fn new(schema: Schema, rows: Vec<Vec<Cell>>) -> Result<Self> {
        schema.validate()?;
        if rows.is_empty() {
            return Err(Error::InsufficientData("a dataset needs at least one row".into()));
        }
        let ds = Dataset { schema, rows, labeled: true };
        for (r, row) in ds.rows.iter().enumerate() {
            ds.check_row(row, r + 2)?;
        }
        Ok(ds)
    }

    fn check_row(&self, row: &[Cell], line: usize) -> Result<()> {
        let p = self.schema.len();
        if row.len() != p {
            return Err(Error::RowLength { line, expected: p, found: row.len() });
        }
        for (spec, &cell) in self.schema.variables.iter().zip(row) {
            match cell {
                Cell::Missing => {
                    if spec.role == Role::Outcome {
                        if self.labeled {
                            return Err(Error::MissingOutcome { line, column: spec.name.clone() });
                        }
                    } else if !spec.missing_allowed {
                        return Err(Error::MissingNotAllowed { line, column: spec.name.clone() });
                    }
                }
                Cell::Level(l) => {
                    if !spec.kind.is_discrete() || !spec.levels.contains(&l) {
                        return Err(Error::LevelOutOfRange {
                            line,
                            column: spec.name.clone(),
                            value: l,
                            levels: spec.levels.clone(),
                        });
                    }
                }
                Cell::Real(x) => {
                    if spec.kind.is_discrete() || !x.is_finite() {
                        return Err(Error::Parse { line, column: spec.name.clone(), value: x.to_string() });
                    }
                }
            }
        }
        Ok(())
    }

    /// Reads a labeled dataset. Header names must equal the schema names, in order.
    pub fn from_csv<R: Read>(csv_source: R, schema: Schema) -> Result<Self> {
        Self::read_csv(csv_source, schema, true)
    }

    /// Reads a dataset whose outcome column may be absent or `NA` (e.g. students
    /// to score). The outcome cells of such a dataset are all missing.
    pub fn from_csv_unlabeled<R: Read>(csv_source: R, schema: Schema) -> Result<Self> {
        Self::read_csv(csv_source, schema, false)
    }

    fn read_csv<R: Read>(csv_source: R, schema: Schema, labeled: bool) -> Result<Self> {
        schema.validate()?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(csv_source);
        let header = reader.headers()?.clone();
        let outcome = schema.outcome_index();
        let names: Vec<String> = schema.variables.iter().map(|v| v.name.clone()).collect();

        // Column positions in the file, per schema column.
        let outcome_in_file = header.len() == names.len() || labeled;
        let expected: Vec<usize> =
            (0..names.len()).filter(|&i| outcome_in_file || i != outcome).collect();
        for (pos, field) in header.iter().enumerate() {
            if schema.index_of(field).is_none() {
                return Err(Error::UnknownColumn { line: 1, column: field.to_string() });
            }
            match expected.get(pos) {
                Some(&i) if names[i] == field => {}
                Some(&i) => {
                    return Err(Error::ColumnOrder { line: 1, expected: names[i].clone(), found: field.into() })
                }
                None => return Err(Error::RowLength { line: 1, expected: expected.len(), found: header.len() }),
            }
        }
        if header.len() < expected.len() {
            return Err(Error::ColumnOrder {
                line: 1,
                expected: names[expected[header.len()]].clone(),
                found: "<end of header>".into(),
            });
        }

        let mut ds = Dataset { schema, rows: Vec::new(), labeled };
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            if record.len() != expected.len() {
                return Err(Error::RowLength { line, expected: expected.len(), found: record.len() });
            }
            let mut row = vec![Cell::Missing; names.len()];
            for (field, &col) in record.iter().zip(&expected) {
                row[col] = parse_cell(field, &ds.schema.variables[col], line)?;
            }
            ds.check_row(&row, line)?;
            ds.rows.push(row);
        }
        if labeled && ds.rows.is_empty() {
            return Err(Error::InsufficientData("a dataset needs at least one row".into()));
        }
        Ok(ds)
    }

    /// Writes the dataset back out as CSV with `NA` for missing cells. Unlabeled
    /// datasets are written with their (missing) outcome column.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let names: Vec<&str> = self.schema.variables.iter().map(|v| v.name.as_str()).collect();
        out.push_str(&names.join(","));
        out.push('\n');
        for row in &self.rows {
            for (i, &cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                cell.render(&mut out);
            }
            out.push('\n');
        }
        out
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.schema.len()
    }

    pub fn is_labeled(&self) -> bool {
        self.labeled
    }

    #[inline]
    pub fn cell(&self, row: usize, col: usize) -> Cell {
        self.rows[row][col]
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.schema.index_of(name).ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn column_values(&self, col: usize) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r[col].as_f64()).collect()
    }

    /// Outcome labels (0 or 1). Panics on an unlabeled dataset.
    pub fn labels(&self) -> Vec<u8> {
        assert!(self.labeled, "labels requested from an unlabeled dataset");
        let o = self.schema.outcome_index();
        self.rows
            .iter()
            .map(|r| match r[o] {
                Cell::Level(l) => l as u8,
                _ => unreachable!("outcome validated"),
            })
            .collect()
    }

    pub fn missing_count(&self) -> usize {
        let o = self.schema.outcome_index();
        self.rows.iter().map(|r| r.iter().enumerate().filter(|&(c, x)| c != o && x.is_missing()).count()).sum()
    }

    pub fn has_missing(&self) -> bool {
        self.missing_count() > 0
    }

    pub fn subset_rows(&self, rows: &RowIndexSet) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: rows.as_slice().iter().map(|&i| self.rows[i].clone()).collect(),
            labeled: self.labeled,
        }
    }

    /// Appends the rows of `other`, which must share this schema.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.schema != other.schema {
            return Err(Error::Schema("datasets do not share a schema".into()));
        }
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        Ok(Dataset { schema: self.schema.clone(), rows, labeled: self.labeled && other.labeled })
    }

    /// Raw numeric values of the listed columns; missing cells become `None`.
    pub fn raw_matrix<F: Float>(&self, cols: &[usize]) -> Matrix<Option<F>> {
        let mut m = Matrix::filled(self.n_rows(), cols.len(), None);
        for (r, row) in self.rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                m.set(r, j, row[c].as_f64().map(F::lit));
            }
        }
        m
    }

    /// Replaces cells in place, re-checking the row. Used by imputation.
    pub(crate) fn with_cells(&self, updates: &[(usize, usize, Cell)]) -> Result<Dataset> {
        let mut rows = self.rows.clone();
        for &(r, c, v) in updates {
            rows[r][c] = v;
        }
        let ds = Dataset { schema: self.schema.clone(), rows, labeled: self.labeled };
        for &(r, _, _) in updates {
            ds.check_row(&ds.rows[r], r + 2)?;
        }
        Ok(ds)
    }

    /// Replaces a continuous column with equal-frequency bin codes `1..=n_bins`.
    pub fn discretize_column(&self, name: &str, n_bins: usize) -> Result<Dataset> {
        let c = self.column_index(name)?;
        let values: Vec<Option<f64>> = self.column_values(c);
        let codes = discretize(&values, n_bins)?;
        let mut schema = self.schema.clone();
        let spec = &mut schema.variables[c];
        spec.kind = VariableKind::OrdinalDiscrete;
        spec.levels = (1..=n_bins as i64).collect();
        let mut rows = self.rows.clone();
        for (row, code) in rows.iter_mut().zip(codes) {
            row[c] = code.map_or(Cell::Missing, Cell::Level);
        }
        Ok(Dataset { schema, rows, labeled: self.labeled })
    }
}

fn parse_cell(field: &str, spec: &VariableSpec, line: usize) -> Result<Cell> {
    if field == MISSING_MARKER {
        return Ok(Cell::Missing);
    }
    let bad = || Error::Parse { line, column: spec.name.clone(), value: field.to_string() };
    if spec.kind.is_discrete() {
        let l: i64 = field.parse().map_err(|_| bad())?;
        if !spec.levels.contains(&l) {
            return Err(Error::LevelOutOfRange { line, column: spec.name.clone(), value: l, levels: spec.levels.clone() });
        }
        Ok(Cell::Level(l))
    } else {
        let x: f64 = field.parse().map_err(|_| bad())?;
        if !x.is_finite() {
            return Err(bad());
        }
        Ok(Cell::Real(x))
    }
}

/// Reads a CSV byte stream against a JSON schema byte stream.
pub fn load_dataset<R: Read, S: Read>(csv_source: R, schema_source: S) -> Result<Dataset> {
    let schema = Schema::from_json(schema_source)?;
    Dataset::from_csv(csv_source, schema)
}

/// Per-column standardization parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NormalizationParams<F: Float> {
    /// Dataset column indices, in matrix column order.
    pub columns: Vec<usize>,
    pub names: Vec<String>,
    pub mean: Vec<F>,
    pub std: Vec<F>,
    pub constant: Vec<bool>,
}

impl<F: Float> NormalizationParams<F> {
    /// Standardizes the same columns of another dataset with these parameters.
    pub fn apply(&self, dataset: &Dataset) -> Matrix<Option<F>> {
        let mut m = dataset.raw_matrix::<F>(&self.columns);
        for r in 0..m.rows() {
            for j in 0..m.cols() {
                let v = m.get(r, j).map(|x| self.standardize(j, x));
                m.set(r, j, v);
            }
        }
        m
    }

    #[inline]
    pub fn standardize(&self, j: usize, x: F) -> F {
        if self.constant[j] {
            F::zero()
        } else {
            (x - self.mean[j]) / self.std[j]
        }
    }

    /// Inverse transform: `z * std + mean`.
    pub fn denormalize(&self, m: &Matrix<Option<F>>) -> Matrix<Option<F>> {
        let mut out = m.clone();
        for r in 0..m.rows() {
            for j in 0..m.cols() {
                out.set(r, j, m.get(r, j).map(|z| z * self.std[j] + self.mean[j]));
            }
        }
        out
    }
}

/// Mean and sample standard deviation (divisor n - 1) of the observed values.
pub(crate) fn observed_moments<F: Float>(values: &[Option<F>]) -> (usize, F, F) {
    let (n, sum) = values.iter().flatten().fold((0usize, F::zero()), |(n, s), &x| (n + 1, s + x));
    if n == 0 {
        return (0, F::zero(), F::zero());
    }
    let mean = sum / F::from_count(n);
    if n < 2 {
        return (n, mean, F::zero());
    }
    let ss = values.iter().flatten().fold(F::zero(), |s, &x| s + (x - mean) * (x - mean));
    (n, mean, (ss / F::from_count(n - 1)).sqrt())
}

pub(crate) fn standardize_raw<F: Float>(
    dataset: &Dataset,
    cols: &[usize],
    strict: bool,
) -> Result<(Matrix<Option<F>>, NormalizationParams<F>)> {
    let raw = dataset.raw_matrix::<F>(cols);
    let mut params = NormalizationParams {
        columns: cols.to_vec(),
        names: cols.iter().map(|&c| dataset.schema().variables[c].name.clone()).collect(),
        mean: Vec::with_capacity(cols.len()),
        std: Vec::with_capacity(cols.len()),
        constant: Vec::with_capacity(cols.len()),
    };
    for j in 0..cols.len() {
        let (n, mean, std) = observed_moments(&raw.column(j).collect::<Vec<_>>());
        if strict && n < 2 {
            return Err(Error::InsufficientData(format!(
                "column `{}` has {n} observed values; standardization needs 2",
                params.names[j]
            )));
        }
        // exact zero spread is the constant-column convention
        let constant = std == F::zero();
        params.mean.push(mean);
        params.std.push(std);
        params.constant.push(constant);
    }
    let mut out = raw;
    for r in 0..out.rows() {
        for j in 0..out.cols() {
            let v = out.get(r, j).map(|x| params.standardize(j, x));
            out.set(r, j, v);
        }
    }
    Ok((out, params))
}

/// Standardizes every non-outcome column to zero mean and unit sample standard
/// deviation. Missing cells are skipped in the moments and stay missing; constant
/// columns become all zeros.
pub fn normalize<F: Float>(dataset: &Dataset) -> Result<(Matrix<Option<F>>, NormalizationParams<F>)> {
    standardize_raw(dataset, &dataset.schema().feature_indices(), true)
}

/// [`normalize`] restricted to the listed columns.
pub fn normalize_columns<F: Float>(
    dataset: &Dataset,
    cols: &[usize],
) -> Result<(Matrix<Option<F>>, NormalizationParams<F>)> {
    standardize_raw(dataset, cols, true)
}

/// How bin edges are placed by [`discretize_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinningRule {
    /// Quantile bins; a value's bin is set by how many observations lie strictly below it.
    #[default]
    EqualFrequency,
    /// Bins of equal width between the observed minimum and maximum.
    EqualWidth,
}

/// Equal-frequency discretization into codes `1..=n_bins`.
pub fn discretize<F: Float>(values: &[Option<F>], n_bins: usize) -> Result<Vec<Option<i64>>> {
    discretize_with(values, n_bins, BinningRule::EqualFrequency)
}

pub fn discretize_with<F: Float>(values: &[Option<F>], n_bins: usize, rule: BinningRule) -> Result<Vec<Option<i64>>> {
    if !(4..=5).contains(&n_bins) {
        return Err(Error::InvalidArgument(format!("n_bins must be 4 or 5, got {n_bins}")));
    }
    let mut sorted: Vec<F> = values.iter().flatten().copied().collect();
    if sorted.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidArgument("NaN in discretization input".into()));
    }
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (lo, hi) = match (sorted.first(), sorted.last()) {
        (Some(&lo), Some(&hi)) if lo < hi => (lo, hi),
        _ => return Err(Error::InvalidArgument("all values identical; nothing to discretize".into())),
    };
    let m = sorted.len();
    let code = |x: F| -> i64 {
        match rule {
            BinningRule::EqualFrequency => {
                let below = sorted.partition_point(|&v| v < x);
                (below * n_bins / m) as i64 + 1
            }
            BinningRule::EqualWidth => {
                let t = ((x - lo) / (hi - lo) * F::from_count(n_bins)).floor();
                (t.as_f64() as i64).clamp(0, n_bins as i64 - 1) + 1
            }
        }
    };
    Ok(values.iter().map(|v| v.map(code)).collect())
}
