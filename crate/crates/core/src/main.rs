use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use intxlab::anova::{decompose, report, tabulate, WeightedGrid};
use intxlab::experiment::{self, Experiment, ExperimentConfig, RunManifest, RunSummary};
use intxlab::mlp::read_model;
use intxlab::{Error, Result};

#[derive(Parser)]
#[command(
    name = "intxlab",
    version,
    about = "Dropout and interaction-effect experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Repetitions per cell.
    #[arg(long)]
    reps: Option<usize>,
    /// `key=value`, repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Dropout rate sweep on pure-noise regression.
    NoiseSweep(RunArgs),
    /// Activation vs input dropout at two hidden widths.
    WidthContrast(RunArgs),
    /// Interaction shares over training, with and without dropout.
    EpochsTrace(RunArgs),
    /// Weight-decay sweep against an input-dropout reference.
    WeightDecaySweep(RunArgs),
    /// Exact decomposition of x0*x1 under correlated Gaussians.
    ToyDecomposition(RunArgs),
    /// Best dropout rate per planted interaction order.
    PlantedSweep(RunArgs),
    /// Effective learning rate per interaction order.
    BalanceCurve(RunArgs),
    /// Monte Carlo checks of the dropout scaling results.
    VerifyTheorems {
        /// Comma-separated dropout rates.
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        masks: Option<usize>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Exact ANOVA of a saved network on a grid.
    Decompose {
        #[arg(long)]
        model: PathBuf,
        /// `uniform:LO:HI:N` or `gaussian:RHO:N`.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeat a recorded run and compare its CSVs with the original.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn config(exp: Experiment, a: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::from_file(p, Some(exp))?,
        None => ExperimentConfig::new(exp),
    };
    if let Some(s) = a.seed {
        cfg.set("seed", &s.to_string())?;
    }
    if let Some(r) = a.reps {
        cfg.set("reps", &r.to_string())?;
    }
    for o in &a.overrides {
        cfg.apply_override(o)?;
    }
    Ok(cfg)
}

fn print_summary(s: &RunSummary) {
    for c in &s.checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        let kind = if c.acceptance { "" } else { " (info)" };
        println!("{tag}{kind} {}: {}", c.name, c.detail);
    }
    for w in &s.manifest.warnings {
        println!("warning: {w}");
    }
    println!(
        "{} artifacts in {:.1}s",
        s.manifest.artifacts.len(),
        s.manifest.duration.as_secs_f64()
    );
}

fn run(cli: Cli) -> Result<bool> {
    let (exp, args) = match cli.command {
        Command::NoiseSweep(a) => (Experiment::NoiseSweep, a),
        Command::WidthContrast(a) => (Experiment::WidthContrast, a),
        Command::EpochsTrace(a) => (Experiment::EpochsTrace, a),
        Command::WeightDecaySweep(a) => (Experiment::WeightDecaySweep, a),
        Command::ToyDecomposition(a) => (Experiment::ToyDecomposition, a),
        Command::PlantedSweep(a) => (Experiment::PlantedSweep, a),
        Command::BalanceCurve(a) => (Experiment::BalanceCurve, a),
        Command::VerifyTheorems { p, masks, run } => {
            let mut cfg = config(Experiment::VerifyTheorems, &run)?;
            if let Some(p) = p {
                cfg.set("theorem_p", &p)?;
            }
            if let Some(m) = masks {
                cfg.set("n_masks", &m.to_string())?;
            }
            let s = experiment::run(&cfg, &run.out)?;
            print_summary(&s);
            return Ok(s.passed());
        }
        Command::Decompose { model, grid, out } => {
            let f = std::fs::File::open(&model).map_err(|e| Error::io(&model, e))?;
            let m = read_model(std::io::BufReader::new(f))?;
            let g = Arc::new(WeightedGrid::parse_spec(&grid, m.config.input_dim)?);
            let values = tabulate(|x| m.predict_scalar(x), g)?;
            let r = report(&decompose(&values)?);
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let p = out.join("decomposition.csv");
            let file = std::fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
            r.write_csv(std::io::BufWriter::new(file))?;
            if let Some(shares) = r.order_shares() {
                for (k, s) in shares.iter().enumerate() {
                    println!("order {}: share {s:.4}", k + 1);
                }
            }
            println!("wrote {}", p.display());
            return Ok(true);
        }
        Command::Rerun { manifest, out } => {
            let original = RunManifest::from_file(&manifest)?;
            let s = experiment::rerun(&manifest, &out)?;
            print_summary(&s);
            let dir = manifest.parent().map(PathBuf::from).unwrap_or_default();
            let diff = experiment::differing_csvs(&original, &dir, &out)?;
            if diff.is_empty() {
                println!("all CSVs match the original run");
            } else {
                println!("CSVs differ from the original run: {}", diff.join(", "));
            }
            return Ok(s.passed() && diff.is_empty());
        }
    };
    let cfg = config(exp, &args)?;
    let s = experiment::run(&cfg, &args.out)?;
    print_summary(&s);
    Ok(s.passed())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
