//! Seeded synthetic cohorts with a latent logistic success model.
//!
//! Every predictor is drawn independently from its marginal over declared
//! levels. Success follows `sigmoid(intercept + Σ effect · z)` where `z` is the
//! level standardized by the marginal's own mean and standard deviation. In
//! rate mode the intercept is bisected so the mean success probability over
//! the drawn rows equals the target; in count mode the rows with the highest
//! latent utility pass.

use std::cmp::Ordering;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Cell, Dataset, Role, Schema, VariableSpec};
use crate::error::{Error, Result};
use crate::num::sigmoid;

pub const FIXTURE_NAMES: [&str; 4] = ["t1-france", "t1-belgium", "t1-mixed", "t2-mixed"];

const MARGINAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuccessTarget {
    /// Expected fraction of passing students.
    Rate(f64),
    /// Exact number of passing students.
    Count(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticVariable {
    pub name: String,
    pub levels: Vec<i64>,
    pub probabilities: Vec<f64>,
    /// Log-odds of success per standard deviation of the level.
    #[serde(default)]
    pub effect: f64,
}

impl SyntheticVariable {
    pub fn new(name: impl Into<String>, levels: Vec<i64>, probabilities: Vec<f64>, effect: f64) -> Self {
        SyntheticVariable { name: name.into(), levels, probabilities, effect }
    }

    pub fn binary(name: impl Into<String>, p_one: f64, effect: f64) -> Self {
        Self::new(name, vec![0, 1], vec![1.0 - p_one, p_one], effect)
    }

    /// Mean and standard deviation of the level under the marginal.
    pub fn moments(&self) -> (f64, f64) {
        let mean: f64 = self.levels.iter().zip(&self.probabilities).map(|(&l, &p)| l as f64 * p).sum();
        let var: f64 = self.levels.iter().zip(&self.probabilities).map(|(&l, &p)| p * (l as f64 - mean).powi(2)).sum();
        (mean, var.sqrt())
    }

    fn standardized(&self, level: i64) -> f64 {
        let (mean, sd) = self.moments();
        if sd > 0.0 {
            (level as f64 - mean) / sd
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    #[serde(default)]
    pub name: String,
    pub n: usize,
    pub success: SuccessTarget,
    pub variables: Vec<SyntheticVariable>,
    #[serde(default)]
    pub missing_rate: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_outcome")]
    pub outcome: String,
}

fn default_outcome() -> String {
    "success".into()
}

impl CohortSpec {
    pub fn new(n: usize, success: SuccessTarget, variables: Vec<SyntheticVariable>) -> Self {
        CohortSpec { name: String::new(), n, success, variables, missing_rate: 0.0, seed: 0, outcome: default_outcome() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_missing_rate(mut self, rate: f64) -> Self {
        self.missing_rate = rate;
        self
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: CohortSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn schema(&self) -> Result<Schema> {
        let mut vars: Vec<VariableSpec> =
            self.variables.iter().map(|v| VariableSpec::predictor(v.name.clone(), v.levels.clone())).collect();
        vars.push(VariableSpec::outcome(self.outcome.clone()));
        Schema::new(vars)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n == 0 {
            return bad("a cohort needs at least one student".into());
        }
        match self.success {
            SuccessTarget::Rate(r) if !(r > 0.0 && r < 1.0) => return bad(format!("success rate {r} is not in (0, 1)")),
            SuccessTarget::Count(c) if c > self.n => {
                return bad(format!("pass count {c} exceeds the cohort size {}", self.n))
            }
            _ => {}
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return bad(format!("missing rate {} is not in [0, 1)", self.missing_rate));
        }
        for v in &self.variables {
            if v.levels.len() != v.probabilities.len() {
                return bad(format!("`{}` has {} levels but {} probabilities", v.name, v.levels.len(), v.probabilities.len()));
            }
            if v.probabilities.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
                return bad(format!("`{}` has a negative or non-finite probability", v.name));
            }
            let total: f64 = v.probabilities.iter().sum();
            if (total - 1.0).abs() > MARGINAL_TOLERANCE {
                return bad(format!("marginal of `{}` sums to {total}, not 1", v.name));
            }
            if !v.effect.is_finite() {
                return bad(format!("`{}` has a non-finite effect", v.name));
            }
        }
        self.schema().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizedMarginal {
    pub variable: String,
    pub levels: Vec<i64>,
    pub counts: Vec<usize>,
    pub proportions: Vec<f64>,
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationManifest {
    pub spec: CohortSpec,
    pub seed: u64,
    /// Intercept that matches the expected success rate over the drawn rows.
    pub intercept: f64,
    pub success_count: usize,
    pub success_rate: f64,
    pub marginals: Vec<RealizedMarginal>,
    pub missing_cells: usize,
    /// FNV-1a digest of the CSV rendering, checked on replay.
    pub csv_digest: String,
}

impl GenerationManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Regenerates the dataset and checks it against the recorded digest.
    pub fn replay(&self) -> Result<Dataset> {
        let mut spec = self.spec.clone();
        spec.seed = self.seed;
        let (ds, again) = generate_cohort(&spec)?;
        if again.csv_digest != self.csv_digest || again.success_count != self.success_count {
            return Err(Error::InvalidArgument("manifest does not reproduce its dataset".into()));
        }
        Ok(ds)
    }
}

pub fn fnv1a_hex(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

/// Mean of `sigmoid(b + eta_i)` is increasing in `b`; bisect until it hits `rate`.
fn solve_intercept(eta: &[f64], rate: f64) -> f64 {
    let mean = |b: f64| eta.iter().map(|&e| sigmoid(b + e)).sum::<f64>() / eta.len() as f64;
    let (mut lo, mut hi) = (-1.0, 1.0);
    while mean(lo) > rate {
        lo *= 2.0;
    }
    while mean(hi) < rate {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean(mid) < rate {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Generates with the rng seeded from `spec.seed`.
pub fn generate_cohort(spec: &CohortSpec) -> Result<(Dataset, GenerationManifest)> {
    generate_cohort_with(spec, &mut ChaCha8Rng::seed_from_u64(spec.seed))
}

/// Draws predictors row by row, then one uniform per row for the outcome,
/// then the missing-cell mask.
pub fn generate_cohort_with<R: Rng + ?Sized>(spec: &CohortSpec, rng: &mut R) -> Result<(Dataset, GenerationManifest)> {
    spec.validate()?;
    let schema = spec.schema()?;
    let samplers: Vec<WeightedIndex<f64>> = spec
        .variables
        .iter()
        .map(|v| WeightedIndex::new(&v.probabilities).map_err(|e| Error::InvalidArgument(format!("`{}`: {e}", v.name))))
        .collect::<Result<_>>()?;
    let p = spec.variables.len();
    let mut levels = vec![vec![0i64; p]; spec.n];
    for row in levels.iter_mut() {
        for (j, s) in samplers.iter().enumerate() {
            row[j] = spec.variables[j].levels[s.sample(rng)];
        }
    }
    let eta: Vec<f64> = levels
        .iter()
        .map(|row| spec.variables.iter().zip(row).map(|(v, &l)| v.effect * v.standardized(l)).sum())
        .collect();
    let u: Vec<f64> = (0..spec.n).map(|_| rng.gen::<f64>()).collect();
    let (intercept, y) = match spec.success {
        SuccessTarget::Rate(rate) => {
            let b = solve_intercept(&eta, rate);
            (b, eta.iter().zip(&u).map(|(&e, &u)| u8::from(u < sigmoid(b + e))).collect::<Vec<u8>>())
        }
        SuccessTarget::Count(pass) => {
            let b = if pass == 0 || pass == spec.n {
                0.0
            } else {
                solve_intercept(&eta, pass as f64 / spec.n as f64)
            };
            // latent utility with standard logistic noise; the top `pass` rows succeed
            let utility: Vec<f64> = eta.iter().zip(&u).map(|(&e, &u)| e - (u / (1.0 - u)).ln()).collect();
            let mut order: Vec<usize> = (0..spec.n).collect();
            order.sort_by(|&a, &b| utility[b].partial_cmp(&utility[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
            let mut y = vec![0u8; spec.n];
            for &r in &order[..pass] {
                y[r] = 1;
            }
            (b, y)
        }
    };
    let rows: Vec<Vec<Cell>> = levels
        .iter()
        .zip(&y)
        .map(|(row, &label)| row.iter().map(|&l| Cell::Level(l)).chain([Cell::Level(i64::from(label))]).collect())
        .collect();
    let mut ds = Dataset::new(schema, rows)?;
    if spec.missing_rate > 0.0 {
        ds = inject_missing(&ds, spec.missing_rate, rng)?;
    }
    let manifest = describe_generated(spec, intercept, &ds);
    Ok((ds, manifest))
}

fn describe_generated(spec: &CohortSpec, intercept: f64, ds: &Dataset) -> GenerationManifest {
    let marginals = spec
        .variables
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let mut counts = vec![0usize; v.levels.len()];
            let mut missing = 0;
            for r in 0..ds.n_rows() {
                match ds.cell(r, j) {
                    Cell::Level(l) => counts[v.levels.iter().position(|&x| x == l).expect("declared level")] += 1,
                    _ => missing += 1,
                }
            }
            let observed = (ds.n_rows() - missing).max(1) as f64;
            RealizedMarginal {
                variable: v.name.clone(),
                levels: v.levels.clone(),
                proportions: counts.iter().map(|&c| c as f64 / observed).collect(),
                counts,
                missing,
            }
        })
        .collect();
    let success_count = ds.labels().iter().filter(|&&y| y == 1).count();
    GenerationManifest {
        spec: spec.clone(),
        seed: spec.seed,
        intercept,
        success_count,
        success_rate: success_count as f64 / ds.n_rows() as f64,
        marginals,
        missing_cells: ds.missing_count(),
        csv_digest: fnv1a_hex(ds.to_csv().as_bytes()),
    }
}

/// Blanks each non-outcome cell independently with probability `rate`.
/// Columns whose schema forbids missing values are left intact.
pub fn inject_missing<R: Rng + ?Sized>(dataset: &Dataset, rate: f64, rng: &mut R) -> Result<Dataset> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("missing rate {rate} is not in [0, 1)")));
    }
    if rate == 0.0 {
        return Ok(dataset.clone());
    }
    let eligible: Vec<bool> =
        dataset.schema().variables.iter().map(|v| v.role != Role::Outcome && v.missing_allowed).collect();
    let rows: Vec<Vec<Cell>> = dataset
        .rows()
        .iter()
        .map(|row| {
            row.iter()
                .zip(&eligible)
                .map(|(&c, &ok)| if ok && rng.gen::<f64>() < rate { Cell::Missing } else { c })
                .collect()
        })
        .collect();
    Dataset::new(dataset.schema().clone(), rows)
}

/// Marginal over `levels` with the given mean, by exponential tilting of the
/// uniform distribution.
pub fn tilted_marginal(levels: &[i64], mean: f64) -> Vec<f64> {
    let weights = |t: f64| -> Vec<f64> {
        let top = levels.iter().map(|&l| t * l as f64).fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = levels.iter().map(|&l| (t * l as f64 - top).exp()).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    };
    let mean_of = |t: f64| weights(t).iter().zip(levels).map(|(p, &l)| p * l as f64).sum::<f64>();
    let (mut lo, mut hi) = (-50.0, 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_of(mid) < mean {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    weights(0.5 * (lo + hi))
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Effect that reproduces a success-rate contrast between the "no" levels
/// (below `split`) and the "yes" levels, to first order.
fn contrast_effect(var: &SyntheticVariable, split: i64, rate_no: f64, rate_yes: f64) -> f64 {
    let group_mean = |yes: bool| {
        let (mut s, mut w) = (0.0, 0.0);
        for (&l, &p) in var.levels.iter().zip(&var.probabilities) {
            if (l >= split) == yes {
                s += p * var.standardized(l);
                w += p;
            }
        }
        s / w
    };
    (logit(rate_yes) - logit(rate_no)) / (group_mean(true) - group_mean(false))
}

/// Descriptive figures for one group of students in the two tables of
/// questionnaire statistics.
struct GroupProfile {
    n: usize,
    pass: usize,
    male: f64,
    with_parents: f64,
    classical_hours: f64,
    language_hours: f64,
    attendance: f64,
    think_pass: f64,
    estimated_success: f64,
    study_time: f64,
    courses_missed: f64,
    never_smoke: f64,
    /// Success rate among students who expect to fail and who expect to pass.
    pass_if_think_fail: f64,
    pass_if_think_pass: f64,
}

const T1_FRANCE: GroupProfile = GroupProfile {
    n: 614,
    pass: 436,
    male: 0.57,
    with_parents: 0.45,
    classical_hours: 0.5,
    language_hours: 4.3,
    attendance: 96.0,
    think_pass: 0.86,
    estimated_success: 70.0,
    study_time: 53.0,
    courses_missed: 0.7,
    never_smoke: 0.69,
    pass_if_think_fail: 0.45,
    pass_if_think_pass: 0.75,
};

const T1_BELGIUM: GroupProfile = GroupProfile {
    n: 169,
    pass: 66,
    male: 0.57,
    with_parents: 0.75,
    classical_hours: 4.9,
    language_hours: 7.7,
    attendance: 90.0,
    think_pass: 0.93,
    estimated_success: 67.0,
    study_time: 58.0,
    courses_missed: 1.2,
    never_smoke: 0.81,
    pass_if_think_fail: 0.17,
    pass_if_think_pass: 0.41,
};

// conditional rates pooled from 685 optimists (460 pass) and 98 pessimists (41 pass)
const T1_MIXED: GroupProfile = GroupProfile {
    n: 783,
    pass: 502,
    male: 0.57,
    with_parents: 0.52,
    classical_hours: 1.5,
    language_hours: 5.0,
    attendance: 95.0,
    think_pass: 0.87,
    estimated_success: 70.0,
    study_time: 54.0,
    courses_missed: 0.8,
    never_smoke: 0.71,
    pass_if_think_fail: 41.0 / 98.0,
    pass_if_think_pass: 460.0 / 685.0,
};

// conditional rates pooled from 196 optimists (85 pass) and 18 pessimists (6 pass)
const T2_MIXED: GroupProfile = GroupProfile {
    n: 214,
    pass: 89,
    male: 0.68,
    with_parents: 0.71,
    classical_hours: 4.2,
    language_hours: 6.4,
    attendance: 94.0,
    think_pass: 0.92,
    estimated_success: 67.0,
    study_time: 55.0,
    courses_missed: 0.7,
    never_smoke: 0.76,
    pass_if_think_fail: 6.0 / 18.0,
    pass_if_think_pass: 85.0 / 196.0,
};

fn questionnaire_variables(g: &GroupProfile) -> Vec<SyntheticVariable> {
    let graded = |name: &str, levels: Vec<i64>, mean: f64| {
        let probs = tilted_marginal(&levels, mean);
        SyntheticVariable::new(name, levels, probs, 0.0)
    };
    let mut think = SyntheticVariable::binary("think_they_will_pass", g.think_pass, 0.0);
    think.effect = contrast_effect(&think, 1, g.pass_if_think_fail, g.pass_if_think_pass);
    vec![
        SyntheticVariable::binary("male", g.male, 0.0),
        SyntheticVariable::binary("lives_with_parents", g.with_parents, 0.0),
        graded("hours_french_latin_greek", vec![0, 2, 4, 6, 8], g.classical_hours),
        graded("hours_foreign_languages", vec![0, 3, 6, 9, 12], g.language_hours),
        graded("classes_attended_pct", vec![60, 70, 80, 90, 100], g.attendance),
        think,
        graded("estimated_success_pct", vec![30, 50, 70, 90], g.estimated_success),
        graded("study_time_pct", vec![20, 40, 60, 80], g.study_time),
        graded("courses_not_attended", vec![0, 1, 2, 3, 4], g.courses_missed),
        SyntheticVariable::binary("never_smoke", g.never_smoke, 0.0),
    ]
}

/// Lecture-theatre behaviour items: answer shares (never, rarely, regularly,
/// very often) for France and Belgium, then success rates for "no" and "yes".
const BEHAVIOUR: [(&str, [f64; 4], [f64; 4], f64, f64); 14] = [
    ("leaves_after_break", [73.0, 21.0, 6.0, 0.0], [57.0, 39.0, 3.0, 1.0], 0.42, 0.33),
    ("arrives_late", [36.0, 52.0, 8.0, 4.0], [49.0, 45.0, 4.0, 2.0], 0.43, 0.27),
    ("takes_notes", [2.0, 8.0, 42.0, 48.0], [0.0, 6.0, 42.0, 52.0], 0.14, 0.44),
    ("same_area", [4.0, 6.0, 48.0, 42.0], [1.0, 12.0, 57.0, 30.0], 0.46, 0.41),
    ("same_neighbours", [4.0, 13.0, 35.0, 48.0], [1.0, 4.0, 51.0, 44.0], 0.47, 0.42),
    ("bothered_by_neighbours", [33.0, 46.0, 13.0, 8.0], [18.0, 59.0, 18.0, 5.0], 0.44, 0.37),
    ("talks_with_neighbours", [13.0, 39.0, 38.0, 10.0], [2.0, 58.0, 33.0, 7.0], 0.43, 0.41),
    ("easily_distracted", [4.0, 44.0, 37.0, 15.0], [7.0, 46.0, 36.0, 11.0], 0.49, 0.34),
    ("asks_lecturer", [40.0, 48.0, 2.0, 10.0], [40.0, 52.0, 7.0, 1.0], 0.40, 0.61),
    ("asks_neighbours", [10.0, 19.0, 58.0, 13.0], [2.0, 25.0, 59.0, 14.0], 0.50, 0.39),
    ("attentive_throughout", [6.0, 31.0, 48.0, 15.0], [5.0, 23.0, 62.0, 10.0], 0.36, 0.45),
    ("laptop_notes", [84.0, 8.0, 2.0, 6.0], [93.0, 5.0, 2.0, 0.0], 0.43, 0.29),
    ("laptop_games", [84.0, 8.0, 6.0, 2.0], [92.0, 4.0, 3.0, 1.0], 0.43, 0.20),
    ("texting", [31.0, 29.0, 27.0, 13.0], [16.0, 48.0, 28.0, 9.0], 0.46, 0.35),
];

const T2_FRANCE_N: f64 = 52.0;
const T2_BELGIUM_N: f64 = 162.0;

fn behaviour_variables() -> Vec<SyntheticVariable> {
    BEHAVIOUR
        .iter()
        .map(|&(name, fr, be, rate_no, rate_yes)| {
            let pooled: Vec<f64> = (0..4).map(|i| T2_FRANCE_N * fr[i] + T2_BELGIUM_N * be[i]).collect();
            let total: f64 = pooled.iter().sum();
            let mut v = SyntheticVariable::new(name, vec![1, 2, 3, 4], pooled.iter().map(|x| x / total).collect(), 0.0);
            v.effect = contrast_effect(&v, 3, rate_no, rate_yes);
            v
        })
        .collect()
}

/// Cohort specs with the published cohort sizes and pass counts. Marginals
/// follow the published descriptive figures; effects are only set where a
/// success-rate contrast was published.
pub fn paper_fixture(name: &str) -> Result<CohortSpec> {
    let (profile, behaviour) = match name {
        "t1-france" => (&T1_FRANCE, false),
        "t1-belgium" => (&T1_BELGIUM, false),
        "t1-mixed" => (&T1_MIXED, false),
        "t2-mixed" => (&T2_MIXED, true),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "unknown fixture `{name}`; expected one of {}",
                FIXTURE_NAMES.join(", ")
            )))
        }
    };
    let mut variables = questionnaire_variables(profile);
    if behaviour {
        variables.extend(behaviour_variables());
    }
    let mut spec = CohortSpec::new(profile.n, SuccessTarget::Count(profile.pass), variables);
    spec.name = name.to_string();
    Ok(spec)
}
