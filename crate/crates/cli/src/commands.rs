use std::fmt;
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cohort::association::{group_means, md_escape, render_associations, render_group_means, select_variables, SelectionRule};
use cohort::classifiers::{FitSettings, Method};
use cohort::dataset::{Dataset, Role, Schema, VariableKind};
use cohort::evaluation::{run_benchmark, train_classifier, EvaluationConfig};
use cohort::imputation::{impute_missing, ImputationConfig};
use cohort::synth::{generate_cohort, paper_fixture, CohortSpec, GenerationManifest, FIXTURE_NAMES};
use serde::Serialize;
use serde_json::json;

use crate::{Format, Options};

#[derive(Debug)]
pub enum CliError {
    /// Bad files, flags or schemas: exit code 2.
    Input(String),
    /// A model could not be fitted: exit code 1.
    Modeling(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Modeling(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Modeling(m) => f.write_str(m),
        }
    }
}

impl From<cohort::Error> for CliError {
    fn from(e: cohort::Error) -> Self {
        if e.is_input_error() {
            CliError::Input(e.to_string())
        } else {
            CliError::Modeling(e.to_string())
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Input(msg.into()))
}

/// Prefixes an error with the file it came from, keeping its exit code.
fn at(path: &Path) -> impl Fn(cohort::Error) -> CliError + '_ {
    move |e| match CliError::from(e) {
        CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
        CliError::Modeling(m) => CliError::Modeling(format!("{}: {m}", path.display())),
    }
}

pub fn validate(o: &Options) -> Result<()> {
    if o.folds < 2 {
        return input(format!("--folds must be at least 2, got {}", o.folds));
    }
    if !(o.alpha > 0.0 && o.alpha < 1.0) {
        return input(format!("--alpha must lie in (0, 1), got {}", o.alpha));
    }
    if !(o.tau >= 0.0) {
        return input(format!("--tau must be non-negative, got {}", o.tau));
    }
    Ok(())
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned())
}

fn read_schema(data: &Path, o: &Options) -> Result<Schema> {
    let path = o.schema.clone().unwrap_or_else(|| sidecar(data, "schema.json"));
    let file = File::open(&path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Schema::from_json(file).map_err(at(&path))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_labeled(data: &Path, o: &Options) -> Result<Dataset> {
    let schema = read_schema(data, o)?;
    Dataset::from_csv(open(data)?, schema).map_err(at(data))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn emit(text: &str, o: &Options) -> Result<()> {
    match &o.out {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

/// Fills missing predictor cells unless `--no-impute` was given. Returns the
/// banner to show when anything was imputed.
fn auto_impute(ds: Dataset, o: &Options) -> Result<(Dataset, Option<String>)> {
    if o.no_impute || !ds.has_missing() {
        return Ok((ds, None));
    }
    let (done, log) = impute_missing::<f64>(&ds, ImputationConfig::default())?;
    let banner = format!(
        "Imputed {} missing cells with the median of the {} most similar students (--no-impute disables this).",
        log.len(),
        ImputationConfig::default().k
    );
    Ok((done, Some(banner)))
}

/// Markdown output carries the banner as its first line; JSON output sends it to stderr.
fn with_banner(banner: &Option<String>, body: String, o: &Options) -> String {
    match (banner, o.format) {
        (Some(b), Format::Markdown) => format!("> {b}\n\n{body}"),
        (Some(b), Format::Json) => {
            eprintln!("{b}");
            body
        }
        (None, _) => body,
    }
}

fn pct0(x: f64) -> String {
    format!("{:.0}", 100.0 * x)
}

#[derive(Serialize)]
struct VariableSummary {
    name: String,
    kind: VariableKind,
    /// Percentage of observed students at the upper level, for binary variables.
    percent_upper: Option<f64>,
    mean: Option<f64>,
    missing: usize,
}

#[derive(Serialize)]
struct Description {
    dataset: String,
    students: usize,
    pass: usize,
    success_rate_percent: f64,
    variables: Vec<VariableSummary>,
}

fn summarize(ds: &Dataset, name: String) -> Description {
    let labels = ds.labels();
    let pass = labels.iter().filter(|&&y| y == 1).count();
    let variables = ds
        .schema()
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.role != Role::Outcome)
        .map(|(c, v)| {
            let observed: Vec<f64> = ds.column_values(c).into_iter().flatten().collect();
            let missing = ds.n_rows() - observed.len();
            let mean = (!observed.is_empty()).then(|| observed.iter().sum::<f64>() / observed.len() as f64);
            let percent_upper = match (v.kind, v.levels.last()) {
                (VariableKind::Binary, Some(&hi)) if !observed.is_empty() => {
                    Some(100.0 * observed.iter().filter(|&&x| x == hi as f64).count() as f64 / observed.len() as f64)
                }
                _ => None,
            };
            VariableSummary { name: v.name.clone(), kind: v.kind, percent_upper, mean, missing }
        })
        .collect();
    Description {
        dataset: name,
        students: ds.n_rows(),
        pass,
        success_rate_percent: 100.0 * pass as f64 / ds.n_rows() as f64,
        variables,
    }
}

fn render_description(d: &Description, schema: &Schema) -> String {
    let mut s = format!(
        "## Descriptive statistics: {name}\n\n| Variables | {name} |\n|---|---:|\n| Number of students | {} |\n| Success rate (%) | {} |\n",
        d.students,
        pct0(d.pass as f64 / d.students as f64),
        name = md_escape(&d.dataset),
    );
    for v in &d.variables {
        let spec = &schema.variables[schema.index_of(&v.name).expect("described variable")];
        let (label, value) = match (v.percent_upper, v.mean) {
            (Some(p), _) if spec.levels == [0, 1] => (format!("{} (%)", v.name), format!("{p:.0}")),
            (Some(p), _) => (format!("{} (% at {})", v.name, spec.levels[1]), format!("{p:.0}")),
            (None, Some(m)) => (format!("{} (mean)", v.name), format!("{m:.1}")),
            (None, None) => (v.name.clone(), "—".into()),
        };
        s.push_str(&format!("| {} | {value} |\n", md_escape(&label)));
    }
    s
}

pub fn describe(data: &Path, o: &Options) -> Result<ExitCode> {
    let ds = read_labeled(data, o)?;
    let d = summarize(&ds, stem(data));
    let text = match o.format {
        Format::Json => to_json(&d),
        Format::Markdown => render_description(&d, ds.schema()),
    };
    emit(&text, o)?;
    Ok(ExitCode::SUCCESS)
}

fn rule(o: &Options) -> SelectionRule {
    SelectionRule { alpha: o.alpha, tau: o.tau }
}

pub fn associate(data: &Path, report_threshold: f64, o: &Options) -> Result<ExitCode> {
    let (ds, banner) = auto_impute(read_labeled(data, o)?, o)?;
    let rule = rule(o);
    let results = select_variables(&ds, rule)?;
    let selected: Vec<&str> = results.iter().filter(|r| r.selected).map(|r| r.variable.as_str()).collect();
    let strong: Vec<&str> = results
        .iter()
        .filter(|r| r.spearman_r.is_some_and(|x| x.abs() > report_threshold))
        .map(|r| r.variable.as_str())
        .collect();
    let means = group_means(&ds, &strong)?;
    let outcome = &ds.schema().variables[ds.schema().outcome_index()].name;
    let body = match o.format {
        Format::Json => to_json(&json!({
            "dataset": stem(data),
            "outcome": outcome,
            "rule": rule,
            "report_threshold": report_threshold,
            "associations": results,
            "selected": selected,
            "group_means": means,
        })),
        Format::Markdown => {
            let mut s = format!("## Association with {}: {}\n\n", md_escape(outcome), md_escape(&stem(data)));
            s.push_str(&render_associations(&results));
            if selected.is_empty() {
                s.push_str(&format!(
                    "\nNo variable passed the selection rule (alpha = {}, tau = {}).\n",
                    rule.alpha, rule.tau
                ));
            } else {
                let names: Vec<String> = selected.iter().map(|v| md_escape(v)).collect();
                s.push_str(&format!("\nSelected ({}): {}.\n", names.len(), names.join(", ")));
            }
            s.push_str(&format!("\n### Group means, |r| > {report_threshold}\n\n"));
            if means.is_empty() {
                s.push_str(&format!("No variable has |r| > {report_threshold}.\n"));
            } else {
                s.push_str(&render_group_means(&means));
            }
            s
        }
    };
    emit(&with_banner(&banner, body, o), o)?;
    Ok(ExitCode::SUCCESS)
}

pub struct EvaluateRun {
    pub methods: Vec<String>,
    pub trees: usize,
    pub tuning_trees: usize,
    pub select_in_folds: bool,
    pub timings: bool,
}

/// Requested methods in report order, without duplicates; all nine when none are named.
fn parse_methods(names: &[String]) -> Result<Vec<Method>> {
    if names.is_empty() {
        return Ok(Method::ALL.to_vec());
    }
    let mut wanted = Vec::new();
    for n in names {
        wanted.push(n.parse::<Method>()?);
    }
    Ok(Method::ALL.into_iter().filter(|m| wanted.contains(m)).collect())
}

fn config(name: String, trees: usize, tuning_trees: usize, o: &Options) -> Result<EvaluationConfig> {
    if trees == 0 || tuning_trees == 0 {
        return input("forests need at least one tree");
    }
    Ok(EvaluationConfig {
        name,
        folds: o.folds,
        seed: o.seed.unwrap_or(0),
        fit: FitSettings { n_trees: trees, tuning_trees, ..FitSettings::default() },
        rule: rule(o),
        select_in_folds: false,
    })
}

pub fn evaluate(data: &Path, run: &EvaluateRun, o: &Options) -> Result<ExitCode> {
    let methods = parse_methods(&run.methods)?;
    let (ds, banner) = auto_impute(read_labeled(data, o)?, o)?;
    let mut config = config(stem(data), run.trees, run.tuning_trees, o)?;
    config.select_in_folds = run.select_in_folds;
    let mut report = run_benchmark::<f64>(&ds, &methods, &config)?;
    if !run.timings {
        for r in &mut report.results {
            r.seconds = 0.0;
        }
    }
    let body = match o.format {
        Format::Json => report.to_json() + "\n",
        Format::Markdown => report.to_markdown(),
    };
    emit(&with_banner(&banner, body, o), o)?;
    if report.results.iter().all(|r| r.failure.is_some()) {
        eprintln!("error: every method failed");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct RiskEntry {
    /// 1-based data row of the scored file.
    row: usize,
    predicted: u8,
    probability: Option<f64>,
    group: &'static str,
}

pub fn predict(train: &Path, apply: &Path, method: &str, trees: usize, o: &Options) -> Result<ExitCode> {
    let method: Method = method.parse()?;
    let (train_ds, banner) = auto_impute(read_labeled(train, o)?, o)?;
    let schema = train_ds.schema().clone();
    let mut scored = Dataset::from_csv_unlabeled(open(apply)?, schema).map_err(at(apply))?;
    let mut imputed_apply = 0;
    if scored.has_missing() && !o.no_impute {
        let n = train_ds.n_rows();
        let joint = train_ds.concat(&scored)?;
        let (done, log) = impute_missing::<f64>(&joint, ImputationConfig::default())?;
        imputed_apply = log.len();
        let rows = cohort::dataset::RowIndexSet::new((n..done.n_rows()).collect(), done.n_rows())?;
        scored = done.subset_rows(&rows);
    }
    let config = config(stem(train), trees, trees, o)?;
    let trained = train_classifier::<f64>(&train_ds, method, &config)?;
    let predicted = trained.predict(&scored).map_err(at(apply))?;
    let probs = trained.probabilities(&scored)?;
    let entries: Vec<RiskEntry> = predicted
        .iter()
        .enumerate()
        .map(|(i, &c)| RiskEntry {
            row: i + 1,
            predicted: c,
            probability: probs.as_ref().map(|p| p[i]),
            group: if c == 1 { "HPS" } else { "LPS" },
        })
        .collect();
    let hps = predicted.iter().filter(|&&c| c == 1).count();
    let body = match o.format {
        Format::Json => to_json(&json!({
            "method": method,
            "trained_on": stem(train),
            "selected": trained.selected,
            "training_error": trained.training_error,
            "students": entries,
        })),
        Format::Markdown => {
            let mut s = format!(
                "## Risk list: {} trained on {}\n\nSelected variables: {}. Training error: {:.2}%.\n",
                method,
                md_escape(&stem(train)),
                trained.selected.iter().map(|v| md_escape(v)).collect::<Vec<_>>().join(", "),
                100.0 * trained.training_error
            );
            if imputed_apply > 0 {
                s.push_str(&format!("Imputed {imputed_apply} missing cells in the scored file.\n"));
            }
            s.push_str(&format!(
                "{} students: {hps} HPS, {} LPS.\n\n| Student | Predicted | P(success) | Group |\n|---:|---:|---:|:---:|\n",
                entries.len(),
                entries.len() - hps
            ));
            for e in &entries {
                let p = e.probability.map_or("—".to_string(), |p| format!("{p:.4}"));
                s.push_str(&format!("| {} | {} | {p} | {} |\n", e.row, e.predicted, e.group));
            }
            s
        }
    };
    emit(&with_banner(&banner, body, o), o)?;
    Ok(ExitCode::SUCCESS)
}

pub fn synth(source: &str, missing_rate: Option<f64>, o: &Options) -> Result<ExitCode> {
    let Some(out) = &o.out else {
        return input("synth needs --out <file.csv>; the schema and manifest are written alongside");
    };
    let from_spec = |mut spec: CohortSpec| -> Result<(Dataset, GenerationManifest)> {
        if let Some(seed) = o.seed {
            spec.seed = seed;
        }
        if let Some(rate) = missing_rate {
            spec.missing_rate = rate;
        }
        Ok(generate_cohort(&spec)?)
    };
    let (ds, manifest) = if FIXTURE_NAMES.contains(&source) {
        from_spec(paper_fixture(source)?)?
    } else if Path::new(source).is_file() {
        let text = fs::read_to_string(source).map_err(|e| CliError::Input(format!("{source}: {e}")))?;
        match GenerationManifest::from_json(&text) {
            Ok(m) => (m.replay().map_err(at(Path::new(source)))?, m),
            Err(_) => from_spec(CohortSpec::from_json(&text).map_err(at(Path::new(source)))?)?,
        }
    } else {
        return input(format!(
            "unknown fixture `{source}`; expected one of {} or a spec or manifest file",
            FIXTURE_NAMES.join(", ")
        ));
    };
    let schema_path = sidecar(out, "schema.json");
    let manifest_path = sidecar(out, "manifest.json");
    write_file(out, &ds.to_csv())?;
    write_file(&schema_path, &(ds.schema().to_json() + "\n"))?;
    write_file(&manifest_path, &(manifest.to_json() + "\n"))?;
    println!(
        "wrote {}: {} students, {} pass ({:.2}%), {} missing cells",
        out.display(),
        ds.n_rows(),
        manifest.success_count,
        100.0 * manifest.success_rate,
        manifest.missing_cells
    );
    println!("schema {}, manifest {}", schema_path.display(), manifest_path.display());
    Ok(ExitCode::SUCCESS)
}

pub fn impute(data: &Path, k: usize, log_path: Option<&Path>, o: &Options) -> Result<ExitCode> {
    let ds = read_labeled(data, o)?;
    let (done, log) = impute_missing::<f64>(&ds, ImputationConfig { k })?;
    emit(&done.to_csv(), o)?;
    if let Some(out) = &o.out {
        write_file(&sidecar(out, "schema.json"), &(done.schema().to_json() + "\n"))?;
    }
    if let Some(path) = log_path {
        write_file(path, &(log.to_json() + "\n"))?;
    }
    eprintln!("imputed {} missing cells", log.len());
    Ok(ExitCode::SUCCESS)
}
