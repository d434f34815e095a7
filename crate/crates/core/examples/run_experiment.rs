//! Run a reduced noise sweep from a config, print its checks, then repeat
//! it from the manifest and compare the tables. The budget is far below
//! the defaults, so individual trend checks may fail.
//!
//! `cargo run --example run_experiment -- [out-dir]`

use std::path::PathBuf;

use intxlab::experiment::{self, ExperimentConfig, RunManifest};

const CONFIG: &str = "
experiment = noise-sweep
reps = 2
width = 16
epochs = 40
n_train = 400
n_heldout = 100
distill_n = 400
eval_n = 500
rounds = 60
dropout_grid = 0, 0.25, 0.5
variants = input, activation
";

fn main() -> intxlab::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("intxlab-example"));
    let cfg = ExperimentConfig::parse(CONFIG, None)?;
    let summary = experiment::run(&cfg, &out)?;
    for c in &summary.checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    println!("artifacts: {}", summary.manifest.artifacts.join(", "));

    let again = out.join("rerun");
    let manifest = out.join("manifest.txt");
    experiment::rerun(&manifest, &again)?;
    let diff = experiment::differing_csvs(&RunManifest::from_file(&manifest)?, &out, &again)?;
    println!("rerun identical: {}", diff.is_empty());
    Ok(())
}
