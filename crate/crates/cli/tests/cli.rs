use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn cohort(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cohort")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn fixture(dir: &Path, name: &str) -> PathBuf {
    let csv = dir.join(format!("{name}.csv"));
    stdout(&cohort(&["synth", name, "--out", csv.to_str().unwrap()]));
    csv
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_writes_csv_schema_and_manifest_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let csv = fixture(dir.path(), "t1-belgium");
    let manifest = dir.path().join("t1-belgium.manifest.json");
    assert!(dir.path().join("t1-belgium.schema.json").exists());
    let copy = dir.path().join("copy.csv");
    stdout(&cohort(&["synth", s(&manifest), "--out", s(&copy)]));
    assert_eq!(fs::read(&csv).unwrap(), fs::read(&copy).unwrap());
}

#[test]
fn unknown_fixture_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = cohort(&["synth", "t9-nowhere", "--out", s(&dir.path().join("x.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("t1-mixed"));
}

#[test]
fn malformed_csv_reports_its_location() {
    let dir = tempfile::tempdir().unwrap();
    let csv = fixture(dir.path(), "t1-belgium");
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut cells: Vec<String> = lines[3].split(',').map(str::to_string).collect();
    cells[0] = "seven".into();
    lines[3] = cells.join(",");
    fs::write(&csv, lines.join("\n") + "\n").unwrap();
    let out = cohort(&["describe", s(&csv)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("seven"), "{err}");
    assert!(err.contains("line 4"), "{err}");
}

#[test]
fn describe_reports_the_published_success_rate() {
    let dir = tempfile::tempdir().unwrap();
    let csv = fixture(dir.path(), "t1-mixed");
    let text = stdout(&cohort(&["describe", s(&csv)]));
    assert!(text.contains("| Number of students | 783 |"));
    assert!(text.contains("| Success rate (%) | 64 |"));
    let json: Value = serde_json::from_str(&stdout(&cohort(&["describe", s(&csv), "--format", "json"]))).unwrap();
    assert!(json.is_object());
}

#[test]
fn evaluate_json_is_valid_deterministic_and_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let csv = fixture(dir.path(), "t2-mixed");
    let args = ["evaluate", s(&csv), "--format", "json", "--seed", "3", "--trees", "40", "--tuning-trees", "20"];
    let first = stdout(&cohort(&args));
    let second = stdout(&cohort(&args));
    assert_eq!(first, second);
    let json: Value = serde_json::from_str(&first).unwrap();
    let methods: Vec<&str> = json["results"].as_array().unwrap().iter().map(|r| r["method"].as_str().unwrap()).collect();
    assert_eq!(
        methods,
        ["decision-tree1", "decision-tree2", "lda", "qda", "random-forest", "logistic-regression", "svm1", "svm2", "knn"]
    );

    let markdown = stdout(&cohort(&["evaluate", s(&csv), "--seed", "3", "--trees", "40", "--tuning-trees", "20"]));
    let rows = ["Decision Tree 1", "Decision Tree 2", "LDA", "QDA", "Random Forests", "Logistic Regression", "SVM 1", "SVM 2", "k-NN"];
    let positions: Vec<usize> = rows.iter().map(|r| markdown.find(&format!("| {r} |")).expect(r)).collect();
    assert!(positions.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn evaluate_runs_only_the_requested_methods() {
    let dir = tempfile::tempdir().unwrap();
    let csv = fixture(dir.path(), "t2-mixed");
    let out = stdout(&cohort(&["evaluate", s(&csv), "--methods", "knn,lda", "--format", "json", "--seed", "1"]));
    let json: Value = serde_json::from_str(&out).unwrap();
    let methods: Vec<&str> = json["results"].as_array().unwrap().iter().map(|r| r["method"].as_str().unwrap()).collect();
    assert_eq!(methods, ["lda", "knn"]);
    let bad = cohort(&["evaluate", s(&csv), "--methods", "oracle"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn strict_selection_rule_leaves_a_note() {
    let dir = tempfile::tempdir().unwrap();
    let csv = fixture(dir.path(), "t1-belgium");
    let text = stdout(&cohort(&["associate", s(&csv), "--tau", "1.01", "--alpha", "1e-300"]));
    assert!(text.contains("No variable passed the selection rule"), "{text}");
}

#[test]
fn invalid_options_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let csv = fixture(dir.path(), "t1-belgium");
    assert_eq!(cohort(&["describe", s(&csv), "--folds", "1"]).status.code(), Some(2));
    assert_eq!(cohort(&["describe", s(&csv), "--alpha", "1.5"]).status.code(), Some(2));
}

#[test]
fn logistic_risk_list_is_consistent_with_its_probabilities() {
    let dir = tempfile::tempdir().unwrap();
    let csv = fixture(dir.path(), "t1-france");
    let out = stdout(&cohort(&["predict", s(&csv), s(&csv), "--method", "logistic", "--format", "json"]));
    let json: Value = serde_json::from_str(&out).unwrap();
    let students = json["students"].as_array().unwrap();
    assert_eq!(students.len(), 614);
    let mut wrong = 0usize;
    let labels: Vec<String> = fs::read_to_string(&csv).unwrap().lines().skip(1).map(|l| l.rsplit(',').next().unwrap().to_string()).collect();
    for (st, label) in students.iter().zip(&labels) {
        let p = st["probability"].as_f64().unwrap();
        let predicted = st["predicted"].as_u64().unwrap();
        assert_eq!(predicted, u64::from(p > 0.5));
        assert_eq!(st["group"], if predicted == 1 { "HPS" } else { "LPS" });
        wrong += usize::from(predicted.to_string() != *label);
    }
    // scoring the training file reproduces the training error
    let training_error = json["training_error"].as_f64().unwrap();
    assert!((wrong as f64 / 614.0 - training_error).abs() < 1e-12);
}

#[test]
fn empty_apply_file_gives_an_empty_list() {
    let dir = tempfile::tempdir().unwrap();
    let csv = fixture(dir.path(), "t1-belgium");
    let header = fs::read_to_string(&csv).unwrap().lines().next().unwrap().to_string();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, header + "\n").unwrap();
    let out = stdout(&cohort(&["predict", s(&csv), s(&empty), "--method", "tree1", "--format", "json", "--schema", s(&dir.path().join("t1-belgium.schema.json"))]));
    let json: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(json["students"].as_array().unwrap().len(), 0);
}

#[test]
fn missing_cells_are_imputed_or_refused() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("gappy.csv");
    stdout(&cohort(&["synth", "t1-belgium", "--missing-rate", "0.05", "--out", s(&csv)]));
    let screened = stdout(&cohort(&["associate", s(&csv)]));
    assert!(screened.starts_with("> Imputed"));
    assert_eq!(cohort(&["evaluate", s(&csv), "--methods", "lda", "--no-impute"]).status.code(), Some(2));

    let filled = dir.path().join("filled.csv");
    let log = dir.path().join("log.json");
    stdout(&cohort(&["impute", s(&csv), "--out", s(&filled), "--log", s(&log)]));
    assert!(!fs::read_to_string(&filled).unwrap().lines().any(|l| l.contains(",,") || l.ends_with(',')));
    let entries: Value = serde_json::from_str(&fs::read_to_string(&log).unwrap()).unwrap();
    assert!(entries.is_object() || entries.is_array());
}
