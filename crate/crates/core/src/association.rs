//! Association between each predictor and the success outcome: Pearson
//! chi-squared independence tests, Spearman rank correlation, the selection
//! rule built on both, and pass/fail group means.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{Cell, Dataset, VariableKind};
use crate::error::{Error, Result};
use crate::num::Float;
use crate::special::chi_squared_sf;

/// Level-by-outcome counts with all-zero rows and columns removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<u64>>,
    pub row_labels: Vec<i64>,
    pub col_labels: Vec<i64>,
    /// Declared levels that never occurred and were dropped.
    pub dropped_rows: Vec<i64>,
    pub dropped_cols: Vec<i64>,
}

impl ContingencyTable {
    /// Builds a table from raw counts, dropping empty margins. Labels default to
    /// `0..r` and `0..c`.
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let r = counts.len();
        let c = counts.first().map_or(0, Vec::len);
        Self::labeled(counts, (0..r as i64).collect(), (0..c as i64).collect())
    }

    fn labeled(counts: Vec<Vec<u64>>, row_labels: Vec<i64>, col_labels: Vec<i64>) -> Result<Self> {
        if counts.is_empty() || counts.iter().any(|r| r.len() != col_labels.len()) {
            return Err(Error::InvalidArgument("contingency counts must form a non-empty rectangle".into()));
        }
        let col_sum = |j: usize| counts.iter().map(|r| r[j]).sum::<u64>();
        let keep_cols: Vec<usize> = (0..col_labels.len()).filter(|&j| col_sum(j) > 0).collect();
        let keep_rows: Vec<usize> = (0..counts.len()).filter(|&i| counts[i].iter().sum::<u64>() > 0).collect();
        let table = ContingencyTable {
            counts: keep_rows.iter().map(|&i| keep_cols.iter().map(|&j| counts[i][j]).collect()).collect(),
            row_labels: keep_rows.iter().map(|&i| row_labels[i]).collect(),
            col_labels: keep_cols.iter().map(|&j| col_labels[j]).collect(),
            dropped_rows: (0..counts.len()).filter(|i| !keep_rows.contains(i)).map(|i| row_labels[i]).collect(),
            dropped_cols: (0..col_labels.len()).filter(|j| !keep_cols.contains(j)).map(|j| col_labels[j]).collect(),
        };
        if table.counts.len() < 2 || table.col_labels.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "contingency table is {}x{} after dropping empty margins; need at least 2x2",
                table.counts.len(),
                table.col_labels.len()
            )));
        }
        Ok(table)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.counts.len(), self.col_labels.len())
    }
}

/// Cross-tabulates a discrete, fully observed variable against the outcome.
pub fn contingency(dataset: &Dataset, variable: &str) -> Result<ContingencyTable> {
    let c = dataset.column_index(variable)?;
    let spec = &dataset.schema().variables[c];
    if spec.kind == VariableKind::ContinuousRaw {
        return Err(Error::ContinuousVariable(variable.to_string()));
    }
    if dataset.n_rows() == 0 {
        return Err(Error::InsufficientData("empty dataset".into()));
    }
    let labels = dataset.labels();
    let mut counts = vec![vec![0u64; 2]; spec.levels.len()];
    for (r, &y) in labels.iter().enumerate() {
        let level = match dataset.cell(r, c) {
            Cell::Level(l) => l,
            _ => {
                return Err(Error::InvalidArgument(format!("variable `{variable}` has missing cells; impute first")))
            }
        };
        let i = spec.levels.binary_search(&level).expect("validated level");
        counts[i][y as usize] += 1;
    }
    ContingencyTable::labeled(counts, spec.levels.clone(), vec![0, 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ChiSquared<F: Float> {
    pub statistic: F,
    pub df: usize,
    pub p: F,
    /// Number of cells whose expected count is below 5.
    pub low_expected_cells: usize,
}

/// Pearson chi-squared test of independence, without continuity correction.
pub fn chi_squared_test<F: Float>(table: &ContingencyTable) -> Result<ChiSquared<F>> {
    chi_squared_test_with(table, false)
}

/// As [`chi_squared_test`]; `yates` applies the continuity correction on 2x2 tables.
pub fn chi_squared_test_with<F: Float>(table: &ContingencyTable, yates: bool) -> Result<ChiSquared<F>> {
    let (r, c) = table.shape();
    let n = F::lit(table.total() as f64);
    let row_tot: Vec<F> = table.counts.iter().map(|row| F::lit(row.iter().sum::<u64>() as f64)).collect();
    let col_tot: Vec<F> =
        (0..c).map(|j| F::lit(table.counts.iter().map(|row| row[j]).sum::<u64>() as f64)).collect();
    let correct = yates && r == 2 && c == 2;
    let mut statistic = F::zero();
    let mut low = 0;
    for i in 0..r {
        for j in 0..c {
            let e = row_tot[i] * col_tot[j] / n;
            if e <= F::zero() {
                return Err(Error::Undefined("zero expected count".into()));
            }
            if e < F::lit(5.0) {
                low += 1;
            }
            let mut d = (F::lit(table.counts[i][j] as f64) - e).abs();
            if correct {
                d = (d - F::lit(0.5)).max(F::zero());
            }
            statistic = statistic + d * d / e;
        }
    }
    let df = (r - 1) * (c - 1);
    Ok(ChiSquared { statistic, df, p: chi_squared_sf(statistic, df), low_expected_cells: low })
}

/// Average ranks (1-based), ties sharing the mean of the positions they span.
pub fn midranks<F: Float>(x: &[F]) -> Vec<F> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![F::zero(); x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share rank (i + j) / 2 + 1
        let rank = F::from_count(i + j + 2) / F::lit(2.0);
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson<F: Float>(a: &[F], b: &[F]) -> Option<F> {
    let n = F::from_count(a.len());
    let ma = a.iter().copied().sum::<F>() / n;
    let mb = b.iter().copied().sum::<F>() / n;
    let (mut sab, mut saa, mut sbb) = (F::zero(), F::zero(), F::zero());
    for (&x, &y) in a.iter().zip(b) {
        sab = sab + (x - ma) * (y - mb);
        saa = saa + (x - ma) * (x - ma);
        sbb = sbb + (y - mb) * (y - mb);
    }
    if saa == F::zero() || sbb == F::zero() {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).max(-F::one()).min(F::one()))
}

/// Spearman rank correlation with midranks for ties.
pub fn spearman<F: Float>(x: &[F], y: &[F]) -> Result<F> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!("lengths differ: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData("spearman needs at least 3 pairs".into()));
    }
    pearson(&midranks(x), &midranks(y)).ok_or_else(|| Error::Undefined("correlation of a constant input".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationResult {
    pub variable: String,
    pub chi2: Option<f64>,
    pub df: Option<usize>,
    pub p: Option<f64>,
    pub spearman_r: Option<f64>,
    pub selected: bool,
    /// Expected counts below 5 were present in the chi-squared table.
    pub low_expected_warning: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionRule {
    /// Chi-squared p-value below which a variable is kept.
    pub alpha: f64,
    /// Absolute Spearman correlation above which a variable is kept.
    pub tau: f64,
}

impl Default for SelectionRule {
    fn default() -> Self {
        SelectionRule { alpha: 0.05, tau: 0.15 }
    }
}

impl SelectionRule {
    /// A variable is kept if either test flags it: `p < alpha` or `|r| > tau`.
    pub fn keeps(&self, p: Option<f64>, r: Option<f64>) -> bool {
        p.is_some_and(|p| p < self.alpha) || r.is_some_and(|r| r.abs() > self.tau)
    }
}

fn associate_one(dataset: &Dataset, col: usize, labels: &[f64], rule: SelectionRule) -> AssociationResult {
    let name = dataset.schema().variables[col].name.clone();
    let mut res = AssociationResult {
        variable: name.clone(),
        chi2: None,
        df: None,
        p: None,
        spearman_r: None,
        selected: false,
        low_expected_warning: false,
        diagnostic: None,
    };
    let values: Option<Vec<f64>> = dataset.column_values(col).into_iter().collect();
    let Some(values) = values else {
        res.diagnostic = Some("missing cells; impute first".into());
        return res;
    };
    let mut problems = Vec::new();
    match spearman(&values, labels) {
        Ok(r) => res.spearman_r = Some(r),
        Err(e) => problems.push(format!("spearman: {e}")),
    }
    match contingency(dataset, &name).and_then(|t| chi_squared_test::<f64>(&t)) {
        Ok(t) => {
            res.chi2 = Some(t.statistic);
            res.df = Some(t.df);
            res.p = Some(t.p);
            res.low_expected_warning = t.low_expected_cells > 0;
        }
        Err(e) => problems.push(format!("chi-squared: {e}")),
    }
    if problems.is_empty() {
        res.selected = rule.keeps(res.p, res.spearman_r);
    } else {
        res.diagnostic = Some(problems.join("; "));
    }
    res
}

/// Tests every predictor against the outcome. Results are ordered by `|r|`,
/// largest first; variables whose tests fail are left unselected with a diagnostic.
pub fn select_variables(dataset: &Dataset, rule: SelectionRule) -> Result<Vec<AssociationResult>> {
    let predictors = dataset.schema().predictor_indices();
    if predictors.len() < 2 {
        return Err(Error::InsufficientData("selection needs at least two predictors".into()));
    }
    let labels: Vec<f64> = dataset.labels().iter().map(|&y| f64::from(y)).collect();
    let mut out: Vec<AssociationResult> =
        predictors.iter().map(|&c| associate_one(dataset, c, &labels, rule)).collect();
    let key = |r: &AssociationResult| r.spearman_r.map_or(-1.0, f64::abs);
    out.sort_by(|a, b| key(b).partial_cmp(&key(a)).unwrap_or(Ordering::Equal));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMeansRow {
    pub variable: String,
    pub mean_pass: f64,
    pub mean_fail: f64,
    /// Declared level range, for discrete variables.
    pub levels: Option<(i64, i64)>,
}

/// Mean of each variable among students who pass and among those who fail.
pub fn group_means(dataset: &Dataset, variables: &[&str]) -> Result<Vec<GroupMeansRow>> {
    let labels = dataset.labels();
    let n_pass = labels.iter().filter(|&&y| y == 1).count();
    if n_pass == 0 || n_pass == labels.len() {
        let empty = if n_pass == 0 { "pass" } else { "fail" };
        return Err(Error::InsufficientData(format!("the {empty} group is empty")));
    }
    variables
        .iter()
        .map(|&name| {
            let c = dataset.column_index(name)?;
            let mut sums = [0.0f64; 2];
            let mut counts = [0usize; 2];
            for (r, &y) in labels.iter().enumerate() {
                let v = dataset.cell(r, c).as_f64().ok_or_else(|| {
                    Error::InvalidArgument(format!("variable `{name}` has missing cells; impute first"))
                })?;
                sums[y as usize] += v;
                counts[y as usize] += 1;
            }
            Ok(GroupMeansRow {
                variable: name.to_string(),
                mean_pass: sums[1] / counts[1] as f64,
                mean_fail: sums[0] / counts[0] as f64,
                levels: dataset.schema().variables[c].level_range(),
            })
        })
        .collect()
}

/// Escapes characters that would break a markdown table cell.
pub fn md_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('|', "\\|")
}

/// Pass/fail mean table: variable with level range, mean for S=1, mean for S=0.
pub fn render_group_means(rows: &[GroupMeansRow]) -> String {
    let mut out = String::from("| Variable | Mean (S=1) | Mean (S=0) |\n|---|---:|---:|\n");
    for row in rows {
        let label = match row.levels {
            Some((lo, hi)) => format!("{} {{{lo},...,{hi}}}", md_escape(&row.variable)),
            None => md_escape(&row.variable),
        };
        writeln!(out, "| {label} | {:.2} | {:.2} |", row.mean_pass, row.mean_fail).unwrap();
    }
    out
}

/// Association table: one row per predictor, in result order.
pub fn render_associations(results: &[AssociationResult]) -> String {
    let mut out = String::from("| Variable | chi2 | df | p | r | Selected |\n|---|---:|---:|---:|---:|:---:|\n");
    let num = |x: Option<f64>, prec: usize| x.map_or("—".to_string(), |v| format!("{v:.prec$}"));
    for r in results {
        let p = r.p.map_or("—".to_string(), |p| if p < 1e-4 { format!("{p:.2e}") } else { format!("{p:.4}") });
        writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} |",
            md_escape(&r.variable),
            num(r.chi2, 2),
            r.df.map_or("—".into(), |d| d.to_string()),
            p,
            num(r.spearman_r, 3),
            if r.selected { "yes" } else { "no" }
        )
        .unwrap();
    }
    out
}
