//! Artifacts written by experiment runs and by the library's text formats
//! read back, aggregate consistently and reproduce bit for bit.

use std::collections::BTreeMap;
use std::io::Cursor;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;

use intxlab::anova::{decompose_product, read_report_csv, report, tabulate, Subset, WeightedGrid};
use intxlab::datagen::{gen_planted_with_base, gen_signal, Dataset, GeneratorKind};
use intxlab::distill::{distill, read_distillation, write_distillation, DistillConfig};
use intxlab::experiment::{self, Experiment, ExperimentConfig, RunManifest, Stat, Table};
use intxlab::mlp::{read_model, write_model, MlpConfig, MlpModel};
use intxlab::theory::{verify_theorem1, BasisModel, TheoremReport};

fn small_sweep() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(Experiment::NoiseSweep);
    for (k, v) in [
        ("reps", "3"),
        ("width", "8"),
        ("epochs", "15"),
        ("n_train", "200"),
        ("n_heldout", "60"),
        ("n_features", "6"),
        ("distill_n", "300"),
        ("eval_n", "300"),
        ("rounds", "20"),
        ("variants", "input,both"),
        ("dropout_grid", "0,0.3"),
    ] {
        cfg.set(k, v).unwrap();
    }
    cfg
}

fn read_table(dir: &Path, name: &str) -> Table {
    Table::read_csv(std::fs::File::open(dir.join(name)).unwrap()).unwrap()
}

#[test]
fn sweep_artifacts_parse_aggregate_and_reproduce() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let summary = experiment::run(&small_sweep(), a.path()).unwrap();
    for name in summary
        .manifest
        .artifacts
        .iter()
        .filter(|n| n.ends_with(".csv"))
    {
        assert!(!read_table(a.path(), name).is_empty(), "{name}");
    }

    let runs = read_table(a.path(), "runs.csv");
    let mut groups: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
    for i in 0..runs.len() {
        let key = (
            runs.get(i, "variant").unwrap().to_string(),
            runs.get(i, "rate").unwrap().to_string(),
        );
        groups.entry(key).or_default().push(i);
    }
    let close =
        |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(1.0) || (x.is_nan() && y.is_nan());
    for (file, prefix) in [
        ("effects_total.csv", "var_"),
        ("effects_normalized.csv", "share_"),
        ("effects_shrinkage.csv", "shrinkage_"),
    ] {
        let t = read_table(a.path(), file);
        for j in 0..t.len() {
            let key = (
                t.get(j, "variant").unwrap().to_string(),
                t.get(j, "rate").unwrap().to_string(),
            );
            let col = format!("{prefix}{}", t.get(j, "order").unwrap());
            let s = Stat::of(groups[&key].iter().map(|&i| runs.f64(i, &col).unwrap()));
            assert_eq!(s.n.to_string(), t.get(j, "n").unwrap(), "{file} row {j}");
            assert!(
                close(s.mean, t.f64(j, "mean").unwrap()),
                "{file} row {j} mean"
            );
            assert!(close(s.std, t.f64(j, "std").unwrap()), "{file} row {j} std");
        }
    }
    let pv = read_table(a.path(), "prediction_variance.csv");
    for j in 0..pv.len() {
        let key = (
            pv.get(j, "variant").unwrap().to_string(),
            pv.get(j, "rate").unwrap().to_string(),
        );
        let s = Stat::of(
            groups[&key]
                .iter()
                .map(|&i| runs.f64(i, "prediction_variance").unwrap()),
        );
        assert!(
            close(s.mean, pv.f64(j, "mean").unwrap()) && close(s.std, pv.f64(j, "std").unwrap())
        );
    }

    let manifest = RunManifest::from_file(&a.path().join("manifest.txt")).unwrap();
    assert_eq!(manifest.config, small_sweep());
    assert_eq!(manifest.artifacts, summary.manifest.artifacts);
    experiment::rerun(&a.path().join("manifest.txt"), b.path()).unwrap();
    assert!(experiment::differing_csvs(&manifest, a.path(), b.path())
        .unwrap()
        .is_empty());
}

#[test]
fn library_formats_round_trip() {
    let ds = gen_signal(GeneratorKind::PairEffects, 50, 0.1, 3).unwrap();
    let mut buf = Vec::new();
    ds.write_csv(&mut buf).unwrap();
    let back = Dataset::read_csv(Cursor::new(&buf)).unwrap();
    assert_eq!(
        (back.features(), back.targets()),
        (ds.features(), ds.targets())
    );

    let (planted, _) = gen_planted_with_base(40, 4, 3, 2, 0.35, 5).unwrap();
    let mut buf = Vec::new();
    planted.write_csv(&mut buf).unwrap();
    let back = Dataset::read_csv(Cursor::new(&buf)).unwrap();
    assert_eq!(
        (back.features(), back.labels()),
        (planted.features(), planted.labels())
    );

    let m = MlpModel::init(MlpConfig::regression(3, vec![4, 2]), 9).unwrap();
    let mut buf = Vec::new();
    write_model(&m, &mut buf).unwrap();
    assert_eq!(read_model(Cursor::new(&buf)).unwrap(), m);

    let x = ndarray::Array2::from_shape_fn((100, 2), |(i, j)| {
        ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0
    });
    let cfg = DistillConfig {
        rounds: 10,
        ..DistillConfig::default()
    };
    let d = distill(|v| v[0] * v[1] + v[0], &x, &cfg).unwrap();
    let mut buf = Vec::new();
    write_distillation(&d, &mut buf).unwrap();
    let back = read_distillation(Cursor::new(&buf)).unwrap();
    let probe = [0.3, -0.2];
    assert_eq!(back.predict(&probe), d.predict(&probe));
    for (a, b) in back.stages.iter().zip(&d.stages) {
        assert_eq!(a.trees, b.trees);
    }

    let grid = Arc::new(WeightedGrid::uniform_midpoint(-1.0, 1.0, 21, 2).unwrap());
    let r = report(&decompose_product(&tabulate(|v| v[0] * v[1] + v[0], grid).unwrap()).unwrap());
    let mut buf = Vec::new();
    r.write_csv(&mut buf).unwrap();
    assert_eq!(read_report_csv(Cursor::new(&buf)).unwrap(), r);

    let model = BasisModel::monomial(2, Subset::from_indices(&[0, 1]), 1.0).unwrap();
    let t = verify_theorem1(&model, 0.3, 5, 100, 1).unwrap();
    let mut buf = Vec::new();
    t.write_csv(&mut buf).unwrap();
    assert_eq!(TheoremReport::read_csv(Cursor::new(&buf)).unwrap(), t);

    let cfg = small_sweep();
    assert_eq!(
        ExperimentConfig::parse(&cfg.to_text(), Some(Experiment::NoiseSweep)).unwrap(),
        cfg
    );
}

fn intxlab(args: &[&str]) -> Option<i32> {
    Command::new(env!("CARGO_BIN_EXE_intxlab"))
        .args(args)
        .output()
        .unwrap()
        .status
        .code()
}

#[test]
fn exit_status_reflects_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = |s: &str| dir.path().join(s).to_str().unwrap().to_string();
    assert_eq!(
        intxlab(&["toy-decomposition", "--out", &out("toy")]),
        Some(0)
    );
    // a single mask per point leaves a zero standard error, so every row fails
    let failing = [
        "verify-theorems",
        "--out",
        &out("vt"),
        "--reps",
        "1",
        "--masks",
        "1",
    ];
    assert_eq!(intxlab(&failing), Some(1));
    assert_eq!(
        intxlab(&[
            "toy-decomposition",
            "--out",
            &out("bad"),
            "--override",
            "grid_n=zero"
        ]),
        Some(2)
    );
    assert_eq!(
        intxlab(&[
            "rerun",
            "--manifest",
            &out("toy/manifest.txt"),
            "--out",
            &out("toy2")
        ]),
        Some(0)
    );
}
