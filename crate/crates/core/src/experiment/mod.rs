//! Config-driven experiment runs that write CSV tables, SVG charts, a
//! `checks.csv` of pass/fail trend checks and a `manifest.txt`.

mod config;
mod manifest;
mod planted;
mod svg;
mod sweep;
mod table;
mod theorems;
mod toy;
mod trace;

pub use config::{Experiment, ExperimentConfig, Variant};
pub use manifest::RunManifest;
pub use svg::LineChart;
pub use table::{Stat, Table};

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};

/// Outcome of one trend or oracle check inside a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    /// Acceptance checks decide the exit status; the rest are informational.
    pub acceptance: bool,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub manifest: RunManifest,
    pub checks: Vec<Check>,
}

impl RunSummary {
    /// True when every acceptance check passed.
    pub fn passed(&self) -> bool {
        self.checks
            .iter()
            .filter(|c| c.acceptance)
            .all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Collects what a run writes.
pub(crate) struct Ctx {
    out: PathBuf,
    artifacts: Vec<String>,
    warnings: Vec<String>,
    checks: Vec<Check>,
    seeds: Vec<(String, u64)>,
}

impl Ctx {
    fn new(out: &Path) -> Self {
        Ctx {
            out: out.to_path_buf(),
            artifacts: Vec::new(),
            warnings: Vec::new(),
            checks: Vec::new(),
            seeds: Vec::new(),
        }
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_string());
        self.out.join(name)
    }

    pub(crate) fn table(&mut self, name: &str, t: &Table) -> Result<()> {
        let p = self.path(name);
        let f = std::fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
        t.write_csv(std::io::BufWriter::new(f))
    }

    pub(crate) fn svg(&mut self, name: &str, chart: &LineChart) -> Result<()> {
        let p = self.path(name);
        std::fs::write(&p, chart.render()).map_err(|e| Error::io(&p, e))
    }

    pub(crate) fn check(
        &mut self,
        name: impl Into<String>,
        acceptance: bool,
        passed: bool,
        detail: impl Into<String>,
    ) {
        self.checks.push(Check {
            name: name.into(),
            acceptance,
            passed,
            detail: detail.into(),
        });
    }

    pub(crate) fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    pub(crate) fn seed(&mut self, label: impl Into<String>, seed: u64) {
        self.seeds.push((label.into(), seed));
    }
}

/// Run `cfg`, writing every artifact into `out` (created if missing).
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let start = Instant::now();
    let mut ctx = Ctx::new(out);
    match cfg.experiment() {
        Experiment::NoiseSweep => sweep::noise_sweep(cfg, &mut ctx)?,
        Experiment::WidthContrast => sweep::width_contrast(cfg, &mut ctx)?,
        Experiment::WeightDecaySweep => sweep::weight_decay_sweep(cfg, &mut ctx)?,
        Experiment::EpochsTrace => trace::epochs_trace(cfg, &mut ctx)?,
        Experiment::ToyDecomposition => toy::toy_decomposition(cfg, &mut ctx)?,
        Experiment::PlantedSweep => planted::planted_sweep(cfg, &mut ctx)?,
        Experiment::BalanceCurve => {
            theorems::balance_curve(cfg, &mut ctx)?;
            theorems::theorems(cfg, &mut ctx)?;
        }
        Experiment::VerifyTheorems => theorems::theorems(cfg, &mut ctx)?,
    }
    let mut t = Table::new(&["check", "acceptance", "passed", "detail"]);
    for c in &ctx.checks {
        t.push(vec![
            c.name.clone(),
            c.acceptance.to_string(),
            c.passed.to_string(),
            c.detail.clone(),
        ]);
    }
    ctx.table("checks.csv", &t)?;
    let manifest = RunManifest {
        config: cfg.clone(),
        seeds: ctx.seeds,
        artifacts: ctx.artifacts,
        warnings: ctx.warnings,
        duration: start.elapsed(),
    };
    let p = out.join("manifest.txt");
    let f = std::fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
    manifest.write(std::io::BufWriter::new(f))?;
    Ok(RunSummary {
        manifest,
        checks: ctx.checks,
    })
}

/// Repeat the run recorded in `manifest` into `out`.
pub fn rerun(manifest: &Path, out: &Path) -> Result<RunSummary> {
    run(&RunManifest::from_file(manifest)?.config, out)
}

/// CSV artifacts of `manifest` whose bytes differ between two output
/// directories.
pub fn differing_csvs(manifest: &RunManifest, a: &Path, b: &Path) -> Result<Vec<String>> {
    let mut diff = Vec::new();
    for name in manifest.artifacts.iter().filter(|n| n.ends_with(".csv")) {
        let read = |dir: &Path| {
            let p = dir.join(name);
            std::fs::read(&p).map_err(|e| Error::io(&p, e))
        };
        if read(a)? != read(b)? {
            diff.push(name.clone());
        }
    }
    Ok(diff)
}

/// `count` out of `total` meets a fraction like 7 of 10.
pub(crate) fn at_least(count: usize, total: usize, num: usize, den: usize) -> bool {
    count * den >= total * num
}
