//! Full nine-method benchmark on a synthetic 783-student cohort.
//!
//! Run with `cargo run --release -p cohort-core --example cohort_benchmark [seed]`.

use std::time::Instant;

use cohort::association::SelectionRule;
use cohort::classifiers::Method;
use cohort::evaluation::{run_benchmark, EvaluationConfig};
use cohort::imputation::{impute_missing, ImputationConfig};
use cohort::synth::{generate_cohort, CohortSpec, SuccessTarget, SyntheticVariable};

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let variables = (0..20)
        .map(|j| {
            let effect = if j < 5 { 1.5 } else { 0.0 };
            SyntheticVariable::new(format!("q{j:02}"), vec![1, 2, 3, 4, 5], vec![0.2; 5], effect)
        })
        .collect();
    let spec = CohortSpec::new(783, SuccessTarget::Count(502), variables).with_seed(seed).with_missing_rate(0.05);
    let start = Instant::now();
    let (raw, _) = generate_cohort(&spec).expect("valid spec");
    let (data, log) = impute_missing::<f64>(&raw, ImputationConfig::default()).expect("imputation");
    let imputed = start.elapsed();
    let config = EvaluationConfig { name: "synthetic".into(), seed, rule: SelectionRule::default(), ..Default::default() };
    let report = run_benchmark::<f64>(&data, &Method::ALL, &config).expect("benchmark");
    println!("{}", report.to_markdown());
    for r in &report.results {
        println!("{:<22} {:>8.2}s", r.method.name(), r.seconds);
    }
    println!("imputed {} cells in {imputed:?}; total {:?}", log.len(), start.elapsed());
}
