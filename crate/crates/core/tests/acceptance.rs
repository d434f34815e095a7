//! One PASS/FAIL line per acceptance criterion, each with its pinned
//! tolerance and runtime budget.
//!
//! `cargo test --test acceptance` runs all criteria; pass criterion numbers
//! after `--` to run a subset, e.g. `cargo test --test acceptance -- 1 5`.
//! Failing criteria are reported but only fail the target when
//! `INTXLAB_ACCEPTANCE_STRICT=1` is set.

mod common;

use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::teachers::{random_function, uniform_rows};
use intxlab::anova::{decompose_product, report, tabulate, Subset, WeightedGrid};
use intxlab::distill::{distill, DistillConfig};
use intxlab::experiment::{self, Experiment, ExperimentConfig, RunManifest, RunSummary, Table};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

/// Every acceptance-flagged check of a run whose name starts with `only`,
/// plus every CSV it wrote must parse.
fn from_run(s: &RunSummary, dir: &Path, only: &str) -> Outcome {
    let mut parts = Vec::new();
    let mut passed = true;
    for c in s
        .checks
        .iter()
        .filter(|c| c.acceptance && c.name.starts_with(only))
    {
        passed &= c.passed;
        parts.push(format!(
            "[{}] {}: {}",
            if c.passed { "ok" } else { "FAIL" },
            c.name,
            c.detail
        ));
    }
    let mut unreadable = Vec::new();
    for name in s.manifest.artifacts.iter().filter(|n| n.ends_with(".csv")) {
        let ok = std::fs::File::open(dir.join(name))
            .map_err(|e| e.to_string())
            .and_then(|f| Table::read_csv(f).map_err(|e| e.to_string()));
        if ok.is_err() {
            unreadable.push(name.clone());
        }
    }
    if !unreadable.is_empty() {
        parts.push(format!("[FAIL] unreadable CSVs: {}", unreadable.join(", ")));
    }
    outcome(
        passed && !parts.is_empty() && unreadable.is_empty(),
        parts.join("; "),
    )
}

fn run_experiment(exp: Experiment, overrides: &[(&str, &str)], dir: &Path) -> Outcome {
    run_checks(exp, overrides, dir, "")
}

fn run_checks(exp: Experiment, overrides: &[(&str, &str)], dir: &Path, only: &str) -> Outcome {
    let mut cfg = ExperimentConfig::new(exp);
    for (k, v) in overrides {
        cfg.set(k, v).expect("override");
    }
    let out = dir.join(format!("{}{only}", exp.name()));
    match experiment::run(&cfg, &out) {
        Ok(s) => from_run(&s, &out, only),
        Err(e) => outcome(false, format!("run failed: {e}")),
    }
}

fn exact_oracle() -> Outcome {
    let grid = Arc::new(WeightedGrid::uniform_midpoint(-1.0, 1.0, 201, 2).unwrap());
    let f = tabulate(|x| x[0] * x[1], grid).unwrap();
    let t = decompose_product(&f).unwrap();
    let var = |u: Subset| t.variance(u).unwrap_or(f64::NAN);
    let pair = var(Subset::full(2));
    let main = var(Subset::from_indices(&[0])).max(var(Subset::from_indices(&[1])));
    let (rec, orth) = (
        t.reconstruction_error(&f),
        t.orthogonality_violation(100, 1),
    );
    let rel = (pair - 1.0 / 9.0).abs() * 9.0;
    outcome(
        rel <= 0.005 && main < 1e-12 && rec < 1e-8 && orth < 1e-8,
        format!("pair variance {pair:.6} ({:.3}% off 1/9), max main {main:.1e}, reconstruction {rec:.1e}, orthogonality {orth:.1e}", rel * 100.0),
    )
}

fn distillation_fidelity() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut failed = Vec::new();
    for s in 0..20u64 {
        let d = 2 + (s as usize % 2);
        let teacher = random_function(d, 1000 + s);
        let grid = Arc::new(
            WeightedGrid::uniform_midpoint(-1.0, 1.0, if d == 2 { 101 } else { 41 }, d).unwrap(),
        );
        let exact = report(&decompose_product(&tabulate(&teacher, grid).unwrap()).unwrap())
            .order_shares()
            .unwrap();
        let staged = distill(
            &teacher,
            &uniform_rows(1500, d, 2000 + s),
            &DistillConfig::default(),
        )
        .unwrap();
        let measured = staged
            .effect_sizes(&teacher, &uniform_rows(2000, d, 3000 + s))
            .unwrap()
            .shares
            .unwrap();
        // orders 1..3 plus the >=4 bucket, which is exactly zero for d <= 3
        let gap = (0..measured.len())
            .map(|k| (measured[k] - exact.get(k).copied().unwrap_or(0.0)).abs())
            .fold(0.0, f64::max);
        worst = worst.max(gap);
        if gap > 0.10 {
            failed.push(format!("teacher {s} (d={d}) gap {gap:.3}"));
        }
    }
    outcome(
        failed.is_empty(),
        format!(
            "{}/20 teachers within 10 points, worst gap {:.3}{}",
            20 - failed.len(),
            worst,
            if failed.is_empty() {
                String::new()
            } else {
                format!(": {}", failed.join("; "))
            }
        ),
    )
}

fn numerical_hygiene(dir: &Path) -> Outcome {
    let fd = common::fd::suite(100);
    let mut parts = vec![format!(
        "finite differences: {} cases ({} masked, {} with weight decay), {} failures, worst rel {:.2e}",
        fd.cases,
        fd.masked,
        fd.decayed,
        fd.failures.len(),
        fd.worst
    )];
    let mut ok = fd.failures.is_empty() && fd.masked >= 40 && fd.decayed >= 60;
    // manifest reproducibility on every cheap experiment and a reduced sweep
    let mut sweep = ExperimentConfig::new(Experiment::NoiseSweep);
    for (k, v) in [
        ("reps", "2"),
        ("width", "8"),
        ("epochs", "20"),
        ("n_train", "300"),
        ("rounds", "30"),
        ("dropout_grid", "0,0.4"),
    ] {
        sweep.set(k, v).unwrap();
    }
    let configs = [
        ExperimentConfig::new(Experiment::ToyDecomposition),
        ExperimentConfig::new(Experiment::BalanceCurve),
        sweep,
    ];
    for cfg in configs {
        let (a, b) = (
            dir.join(format!("repro-{}", cfg.experiment().name())),
            dir.join(format!("repro-{}-again", cfg.experiment().name())),
        );
        let result = experiment::run(&cfg, &a).and_then(|s| {
            let m = RunManifest::from_file(&a.join("manifest.txt"))?;
            let rerun = experiment::rerun(&a.join("manifest.txt"), &b)?;
            let diff = experiment::differing_csvs(&m, &a, &b)?;
            let parsed = s
                .manifest
                .artifacts
                .iter()
                .filter(|n| n.ends_with(".csv"))
                .all(|n| {
                    std::fs::File::open(b.join(n))
                        .ok()
                        .and_then(|f| Table::read_csv(f).ok())
                        .is_some()
                });
            Ok((
                diff,
                parsed && rerun.checks == s.checks,
                s.manifest.artifacts.len(),
            ))
        });
        match result {
            Ok((diff, parsed, n)) => {
                ok &= diff.is_empty() && parsed;
                parts.push(format!(
                    "{}: {n} artifacts, {} differing CSVs",
                    cfg.experiment().name(),
                    diff.len()
                ));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{}: {e}", cfg.experiment().name()));
            }
        }
    }
    outcome(ok, parts.join("; "))
}

fn main() {
    let wanted: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let dir = tempfile::tempdir().expect("temp dir");
    let d = dir.path();
    type Criterion<'a> = (usize, &'a str, u64, Box<dyn Fn() -> Outcome + 'a>);
    let criteria: Vec<Criterion> = vec![
        (1, "exact ANOVA oracle on x0*x1", 5, Box::new(exact_oracle)),
        (
            2,
            "correlated-pair decomposition",
            30,
            Box::new(|| run_experiment(Experiment::ToyDecomposition, &[], d)),
        ),
        (
            3,
            "theorem 1 scaling within 3 standard errors",
            60,
            Box::new(|| run_checks(Experiment::VerifyTheorems, &[], d, "theorem1")),
        ),
        (
            4,
            "theorem 2 gradient ratio within 3 standard errors",
            60,
            Box::new(|| run_checks(Experiment::VerifyTheorems, &[], d, "theorem2")),
        ),
        (
            5,
            "distillation fidelity on 20 random teachers",
            300,
            Box::new(distillation_fidelity),
        ),
        (
            6,
            "noise sweep trends at width 32",
            1200,
            Box::new(|| run_experiment(Experiment::NoiseSweep, &[], d)),
        ),
        (
            7,
            "width-128 activation vs input gain",
            1800,
            Box::new(|| run_experiment(Experiment::WidthContrast, &[("widths", "128")], d)),
        ),
        (
            8,
            "early-stopping traces",
            1200,
            Box::new(|| run_experiment(Experiment::EpochsTrace, &[], d)),
        ),
        (
            9,
            "weight-decay sweep",
            900,
            Box::new(|| run_experiment(Experiment::WeightDecaySweep, &[], d)),
        ),
        (
            10,
            "planted-interaction best rate",
            1800,
            Box::new(|| run_experiment(Experiment::PlantedSweep, &[], d)),
        ),
        (
            11,
            "numerical hygiene",
            600,
            Box::new(|| numerical_hygiene(d)),
        ),
    ];
    let mut failures = 0;
    for (n, name, budget, f) in &criteria {
        if !wanted.is_empty() && !wanted.contains(n) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        let took = start.elapsed();
        let in_time = took <= Duration::from_secs(*budget);
        let passed = o.passed && in_time;
        failures += usize::from(!passed);
        println!(
            "{} criterion {n}: {name} [{:.1}s of {budget}s{}] {}",
            if passed { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            if in_time { "" } else { ", over budget" },
            o.detail
        );
    }
    println!("acceptance: {failures} failing");
    let strict = std::env::var("INTXLAB_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && failures > 0 {
        std::process::exit(1);
    }
}
