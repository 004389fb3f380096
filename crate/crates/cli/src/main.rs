//! `cohort`: describe, screen and benchmark student-success datasets.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "cohort", version, about = "Predict first-year academic success from questionnaire data")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    options: Options,
}

#[derive(Args, Debug, Clone)]
pub struct Options {
    /// Seed for folds, forests, SVM bandwidths and synthetic cohorts.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Number of cross-validation folds.
    #[arg(long, global = true, default_value_t = 10)]
    pub folds: usize,

    /// Chi-squared significance level for variable selection.
    #[arg(long, global = true, default_value_t = 0.05)]
    pub alpha: f64,

    /// Absolute Spearman correlation above which a variable is selected (`inf` disables it).
    #[arg(long, global = true, default_value_t = 0.15)]
    pub tau: f64,

    #[arg(long, global = true, value_enum, default_value_t = Format::Markdown)]
    pub format: Format,

    /// Fail on missing cells instead of imputing them.
    #[arg(long, global = true)]
    pub no_impute: bool,

    /// Output file (synth and impute: the CSV path; schema and manifest go alongside).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Schema sidecar; defaults to `<data>.schema.json` next to the CSV.
    #[arg(long, global = true)]
    pub schema: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Markdown,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cohort size, success rate and per-variable summaries.
    Describe { data: PathBuf },
    /// Chi-squared and Spearman screening of every predictor.
    Associate {
        data: PathBuf,
        /// Group-mean rows are shown for variables with |r| above this.
        #[arg(long, default_value_t = 0.2)]
        report_threshold: f64,
    },
    /// Resubstitution and cross-validated error of the nine classifiers.
    Evaluate {
        data: PathBuf,
        /// Comma-separated subset: tree1, tree2, lda, qda, forest, logistic, svm1, svm2, knn.
        #[arg(long, value_delimiter = ',')]
        methods: Vec<String>,
        /// Trees per random forest.
        #[arg(long, default_value_t = 1000)]
        trees: usize,
        /// Trees per forest while tuning mtry.
        #[arg(long, default_value_t = 1000)]
        tuning_trees: usize,
        /// Repeat variable selection inside every training fold.
        #[arg(long)]
        select_in_folds: bool,
        /// Keep per-method wall-clock times in the JSON report.
        #[arg(long)]
        timings: bool,
    },
    /// Fit one method on a training file and tag each student of another file HPS or LPS.
    Predict {
        train: PathBuf,
        apply: PathBuf,
        #[arg(long)]
        method: String,
        #[arg(long, default_value_t = 1000)]
        trees: usize,
    },
    /// Write a synthetic cohort from a fixture name, a spec file or a manifest.
    Synth {
        /// One of t1-france, t1-belgium, t1-mixed, t2-mixed, or a JSON spec or manifest path.
        source: String,
        /// Fraction of predictor cells to blank at random.
        #[arg(long)]
        missing_rate: Option<f64>,
    },
    /// Fill missing cells from the 10 nearest students.
    Impute {
        data: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Write the imputation log as JSON.
        #[arg(long)]
        log: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let o = &cli.options;
    let result = commands::validate(o).and_then(|()| match cli.command {
        Command::Describe { data } => commands::describe(&data, o),
        Command::Associate { data, report_threshold } => commands::associate(&data, report_threshold, o),
        Command::Evaluate { data, methods, trees, tuning_trees, select_in_folds, timings } => {
            let run = commands::EvaluateRun { methods, trees, tuning_trees, select_in_folds, timings };
            commands::evaluate(&data, &run, o)
        }
        Command::Predict { train, apply, method, trees } => commands::predict(&train, &apply, &method, trees, o),
        Command::Synth { source, missing_rate } => commands::synth(&source, missing_rate, o),
        Command::Impute { data, k, log } => commands::impute(&data, k, log.as_deref(), o),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
