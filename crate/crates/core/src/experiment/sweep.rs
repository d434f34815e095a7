use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, Variant};
use super::svg::LineChart;
use super::table::{f, Stat, Table};
use super::{at_least, Ctx};
use crate::datagen::{gen_noise, Dataset};
use crate::distill::{distill, DistillConfig, EffectSizeReport};
use crate::error::Result;
use crate::mlp::{train, DropoutMode, DropoutSpec, MlpConfig, MlpModel, TrainConfig};
use crate::seed;

/// Network, optimiser and distillation settings shared by every cell.
#[derive(Debug, Clone)]
pub(crate) struct NetSetup {
    pub layers: usize,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub patience: Option<usize>,
    pub mode: DropoutMode,
    pub distill: DistillConfig,
    pub distill_n: usize,
    pub eval_n: usize,
}

impl NetSetup {
    pub fn from_cfg(cfg: &ExperimentConfig) -> Result<Self> {
        let patience = cfg.usize("patience")?;
        let distill = if cfg.has("rounds") {
            let d = DistillConfig {
                max_order: cfg.usize("max_order")?,
                rounds: cfg.usize("rounds")?,
                shrinkage: cfg.f64("shrinkage")?,
                min_leaf: cfg.usize("min_leaf")?,
            };
            d.validate()?;
            d
        } else {
            DistillConfig::default()
        };
        let opt = |k: &str| -> Result<usize> {
            if cfg.has(k) {
                cfg.usize(k)
            } else {
                Ok(0)
            }
        };
        Ok(NetSetup {
            layers: cfg.usize("layers")?,
            lr: cfg.f64("lr")?,
            batch: cfg.usize("batch")?,
            epochs: cfg.usize("epochs")?,
            patience: (patience > 0).then_some(patience),
            mode: cfg.mode()?,
            distill,
            distill_n: opt("distill_n")?,
            eval_n: opt("eval_n")?,
        })
    }

    pub fn train_config(
        &self,
        dropout: DropoutSpec,
        weight_decay: f64,
        rep_seed: u64,
    ) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            epochs: self.epochs,
            batch_size: self.batch,
            weight_decay,
            dropout,
            seed: seed::derive_named(rep_seed, "sgd"),
            checkpoint_every: None,
            patience: self.patience,
        }
    }

    /// Distil `model` on fresh uniform inputs and measure its effect sizes.
    pub fn measure(
        &self,
        model: &MlpModel,
        d: usize,
        rep_seed: u64,
        tag: &str,
    ) -> Result<EffectSizeReport> {
        let x = uniform_inputs(
            self.distill_n,
            d,
            seed::derive_named(rep_seed, &format!("distill{tag}")),
        );
        let xe = uniform_inputs(
            self.eval_n,
            d,
            seed::derive_named(rep_seed, &format!("eval{tag}")),
        );
        let teacher = |v: &[f64]| model.predict_scalar(v);
        distill(teacher, &x, &self.distill)?.effect_sizes(teacher, &xe)
    }

    pub fn order_labels(&self) -> Vec<String> {
        let k = self.distill.max_order;
        (1..k)
            .map(|i| i.to_string())
            .chain(std::iter::once(format!(">={k}")))
            .collect()
    }
}

pub(crate) fn uniform_inputs(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = seed::rng(seed);
    Array2::from_shape_simple_fn((n, d), || rng.gen_range(-1.0..=1.0))
}

/// Seed of repetition `rep`; identical across experiments sharing `seed`.
pub(crate) fn rep_seed(base: u64, rep: usize) -> u64 {
    seed::derive(base, rep as u64)
}

#[derive(Debug, Clone)]
pub(crate) struct Measured {
    pub epochs: usize,
    pub train_loss: f64,
    pub heldout_loss: f64,
    pub diverged: Option<(usize, f64)>,
    /// `None` for diverged runs.
    pub report: Option<EffectSizeReport>,
}

impl Measured {
    fn share(&self, i: usize) -> f64 {
        self.report
            .as_ref()
            .and_then(|r| r.shares.as_ref())
            .map_or(f64::NAN, |s| s[i])
    }
}

#[derive(Debug, Clone, Copy)]
struct NoiseData {
    n_train: usize,
    n_heldout: usize,
    d: usize,
}

/// One configuration of the sweep; `keys` fill the leading table columns.
#[derive(Debug, Clone)]
struct Cell {
    keys: Vec<String>,
    width: usize,
    dropout: DropoutSpec,
    weight_decay: f64,
    /// Index of the cell whose runs normalize this one's shrinkage ratios.
    baseline: usize,
}

fn train_noise(
    setup: &NetSetup,
    nd: NoiseData,
    width: usize,
    dropout: DropoutSpec,
    wd: f64,
    rs: u64,
) -> Result<Measured> {
    let data = gen_noise(nd.n_train, nd.d, seed::derive_named(rs, "train"))?;
    let held = gen_noise(nd.n_heldout, nd.d, seed::derive_named(rs, "heldout"))?;
    let mut model = MlpModel::init(
        MlpConfig::regression(nd.d, vec![width; setup.layers]),
        seed::derive_named(rs, "init"),
    )?;
    let trace = train(
        &mut model,
        &data,
        Some(&held),
        &setup.train_config(dropout, wd, rs),
    )?;
    measured(setup, &model, &trace, &data, rs)
}

fn measured(
    setup: &NetSetup,
    model: &MlpModel,
    trace: &crate::mlp::TrainTrace,
    data: &Dataset,
    rs: u64,
) -> Result<Measured> {
    let last = |v: &[f64]| v.last().copied().unwrap_or(f64::NAN);
    let report = match trace.diverged {
        Some(_) => None,
        None => Some(setup.measure(model, data.d(), rs, "")?),
    };
    Ok(Measured {
        epochs: trace.epochs_run(),
        train_loss: last(&trace.train_loss),
        heldout_loss: last(&trace.heldout_loss),
        diverged: trace.diverged,
        report,
    })
}

/// Dropout spec with zero rates collapsed so equal configurations share runs.
fn canonical(d: DropoutSpec) -> DropoutSpec {
    if d.is_active() {
        d
    } else {
        DropoutSpec::none().with_mode(d.mode)
    }
}

/// Train and measure every cell for every repetition; `result[c][r]`.
fn run_cells(
    setup: &NetSetup,
    nd: NoiseData,
    cells: &[Cell],
    reps: usize,
    base: u64,
) -> Result<Vec<Vec<Measured>>> {
    let mut unique: Vec<(usize, DropoutSpec, f64)> = Vec::new();
    let index: Vec<usize> = cells
        .iter()
        .map(|c| {
            let key = (c.width, canonical(c.dropout), c.weight_decay);
            match unique.iter().position(|u| *u == key) {
                Some(i) => i,
                None => {
                    unique.push(key);
                    unique.len() - 1
                }
            }
        })
        .collect();
    let jobs: Vec<(usize, usize)> = (0..unique.len())
        .flat_map(|u| (0..reps).map(move |r| (u, r)))
        .collect();
    let done: Vec<Measured> = jobs
        .par_iter()
        .map(|&(u, r)| {
            let (w, d, wd) = unique[u];
            train_noise(setup, nd, w, d, wd, rep_seed(base, r))
        })
        .collect::<Result<_>>()?;
    Ok(index
        .iter()
        .map(|&u| (0..reps).map(|r| done[u * reps + r].clone()).collect())
        .collect())
}

struct Aggregate {
    pv: Stat,
    var: Vec<Stat>,
    share: Vec<Stat>,
    ratio: Vec<Stat>,
}

fn ratios(run: &Measured, base: &Measured) -> Option<Vec<f64>> {
    run.report
        .as_ref()?
        .ratios_against(base.report.as_ref()?)
        .ok()
}

fn aggregate(cells: &[Cell], results: &[Vec<Measured>], k: usize) -> Vec<Aggregate> {
    cells
        .iter()
        .zip(results)
        .map(|(c, runs)| {
            let ok: Vec<&EffectSizeReport> =
                runs.iter().filter_map(|m| m.report.as_ref()).collect();
            let rat: Vec<Option<Vec<f64>>> = runs
                .iter()
                .zip(&results[c.baseline])
                .map(|(m, b)| ratios(m, b))
                .collect();
            Aggregate {
                pv: Stat::of(ok.iter().map(|r| r.prediction_variance)),
                var: (0..k)
                    .map(|i| Stat::of(ok.iter().map(|r| r.variance[i])))
                    .collect(),
                share: (0..k)
                    .map(|i| Stat::of(runs.iter().map(|m| m.share(i))))
                    .collect(),
                ratio: (0..k)
                    .map(|i| Stat::of(rat.iter().flatten().map(|v| v[i])))
                    .collect(),
            }
        })
        .collect()
}

/// Write the raw per-run table and the four aggregate tables.
fn write_tables(
    ctx: &mut Ctx,
    setup: &NetSetup,
    key_names: &[&str],
    cells: &[Cell],
    results: &[Vec<Measured>],
    base: u64,
) -> Result<Vec<Aggregate>> {
    let labels = setup.order_labels();
    let k = labels.len();
    let mut header: Vec<String> = key_names.iter().map(|s| s.to_string()).collect();
    header.extend(
        [
            "rep",
            "seed",
            "status",
            "epochs",
            "train_loss",
            "heldout_loss",
            "prediction_variance",
        ]
        .map(String::from),
    );
    for prefix in ["var", "share", "shrinkage"] {
        header.extend(labels.iter().map(|l| format!("{prefix}_{l}")));
    }
    let mut raw = Table::new(&header);
    for (c, runs) in cells.iter().zip(results) {
        for (r, m) in runs.iter().enumerate() {
            let mut row = c.keys.clone();
            let rs = rep_seed(base, r);
            row.push(r.to_string());
            row.push(rs.to_string());
            row.push(
                if m.diverged.is_some() {
                    "diverged"
                } else {
                    "ok"
                }
                .into(),
            );
            row.push(m.epochs.to_string());
            row.push(f(m.train_loss));
            row.push(f(m.heldout_loss));
            let nan = vec![f64::NAN; k];
            let rep = m.report.as_ref();
            row.push(f(rep.map_or(f64::NAN, |r| r.prediction_variance)));
            row.extend(rep.map_or(&nan, |r| &r.variance).iter().map(|v| f(*v)));
            row.extend((0..k).map(|i| f(m.share(i))));
            let rat = ratios(m, &results[c.baseline][r]).unwrap_or_else(|| nan.clone());
            row.extend(rat.iter().map(|v| f(*v)));
            raw.push(row);
            if let Some((epoch, loss)) = m.diverged {
                ctx.warn(format!(
                    "{} rep {r}: diverged at epoch {epoch} (loss {loss}); excluded",
                    c.keys.join(" ")
                ));
            }
        }
    }
    ctx.table("runs.csv", &raw)?;

    let agg = aggregate(cells, results, k);
    let mut long_header: Vec<&str> = key_names.to_vec();
    long_header.extend(["order", "n", "mean", "std"]);
    for (name, pick) in [
        ("effects_total.csv", 0),
        ("effects_normalized.csv", 1),
        ("effects_shrinkage.csv", 2),
    ] {
        let mut t = Table::new(&long_header);
        for (c, a) in cells.iter().zip(&agg) {
            let stats = [&a.var, &a.share, &a.ratio][pick];
            for (l, s) in labels.iter().zip(stats) {
                let mut row = c.keys.clone();
                row.extend([l.clone(), s.n.to_string(), f(s.mean), f(s.std)]);
                t.push(row);
            }
        }
        ctx.table(name, &t)?;
    }
    let mut pv_header: Vec<&str> = key_names.to_vec();
    pv_header.extend(["n", "mean", "std"]);
    let mut t = Table::new(&pv_header);
    for (c, a) in cells.iter().zip(&agg) {
        let mut row = c.keys.clone();
        row.extend([a.pv.n.to_string(), f(a.pv.mean), f(a.pv.std)]);
        t.push(row);
    }
    ctx.table("prediction_variance.csv", &t)?;
    Ok(agg)
}

fn noise_data(cfg: &ExperimentConfig) -> Result<NoiseData> {
    Ok(NoiseData {
        n_train: cfg.usize("n_train")?,
        n_heldout: cfg.usize("n_heldout")?,
        d: cfg.usize("n_features")?,
    })
}

fn record_seeds(ctx: &mut Ctx, base: u64, reps: usize) {
    for r in 0..reps {
        ctx.seed(format!("rep {r}"), rep_seed(base, r));
    }
}

/// At most one decrease along the sequence, and that one within the
/// larger of the two neighbouring standard deviations.
pub(crate) fn non_decreasing_one_inversion(stats: &[Stat]) -> (bool, String) {
    let drops: Vec<usize> = (1..stats.len())
        .filter(|&i| !(stats[i].mean >= stats[i - 1].mean))
        .collect();
    let means: Vec<String> = stats.iter().map(|s| format!("{:.4}", s.mean)).collect();
    let ok = match drops.as_slice() {
        [] => true,
        [i] => stats[*i - 1].mean - stats[*i].mean <= stats[*i].std.max(stats[*i - 1].std),
        _ => false,
    };
    (
        ok,
        format!("means [{}], {} inversion(s)", means.join(", "), drops.len()),
    )
}

fn sweep_cells(
    widths: &[usize],
    variants: &[Variant],
    grid: &[f64],
    mode: DropoutMode,
    wd: f64,
    with_width: bool,
) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &w in widths {
        let first = cells.len();
        for &v in variants {
            for &p in grid {
                let mut keys = vec![v.to_string(), f(p)];
                if with_width {
                    keys.insert(0, w.to_string());
                }
                cells.push(Cell {
                    keys,
                    width: w,
                    dropout: v.spec(p, mode),
                    weight_decay: wd,
                    baseline: 0,
                });
            }
        }
        // baseline: the rate-0 cell of the same width and variant
        let per_variant = grid.len();
        let zero = grid.iter().position(|&p| p == 0.0);
        for (j, c) in cells[first..].iter_mut().enumerate() {
            let v0 = first + (j / per_variant) * per_variant;
            c.baseline = zero.map_or(first + j, |z| v0 + z);
        }
    }
    cells
}

fn share_chart(
    title: &str,
    cells: &[Cell],
    agg: &[Aggregate],
    grid: &[f64],
    variants: &[Variant],
    offset: usize,
) -> LineChart {
    let mut chart = LineChart::new(title, "dropout rate", "order-1 share");
    for (vi, v) in variants.iter().enumerate() {
        let pts = (0..grid.len()).map(|j| {
            let i = offset + vi * grid.len() + j;
            debug_assert!(cells[i].keys.contains(&v.to_string()));
            (grid[j], agg[i].share[0].mean)
        });
        chart = chart.series(v.name(), pts.collect());
    }
    chart
}

pub(crate) fn noise_sweep(cfg: &ExperimentConfig, ctx: &mut Ctx) -> Result<()> {
    let setup = NetSetup::from_cfg(cfg)?;
    let (reps, base) = (cfg.usize("reps")?, cfg.u64("seed")?);
    let variants = cfg.variants("variants")?;
    let grid = cfg.f64_list("dropout_grid")?;
    let cells = sweep_cells(
        &[cfg.usize("width")?],
        &variants,
        &grid,
        setup.mode,
        cfg.f64("weight_decay")?,
        false,
    );
    record_seeds(ctx, base, reps);
    if !grid.contains(&0.0) {
        ctx.warn("dropout grid has no 0 rate; shrinkage ratios use each cell as its own baseline");
    }
    let results = run_cells(&setup, noise_data(cfg)?, &cells, reps, base)?;
    let agg = write_tables(ctx, &setup, &["variant", "rate"], &cells, &results, base)?;

    let n = grid.len();
    for (vi, v) in variants.iter().enumerate() {
        let rows = &agg[vi * n..(vi + 1) * n];
        let shares: Vec<Stat> = rows.iter().map(|a| a.share[0]).collect();
        let (ok, detail) = non_decreasing_one_inversion(&shares);
        ctx.check(
            format!("{v}: order-1 share non-decreasing in rate"),
            true,
            ok,
            detail,
        );
        if *v == Variant::Input {
            let pv: Vec<f64> = rows.iter().map(|a| a.pv.mean).collect();
            let ok = pv.windows(2).all(|w| w[1] < w[0]);
            let shown: Vec<String> = pv.iter().map(|x| format!("{x:.5}")).collect();
            ctx.check(
                "input: prediction variance strictly decreasing in rate",
                true,
                ok,
                format!("means [{}]", shown.join(", ")),
            );
        }
        if let (Some(z), Some(last)) = (grid.iter().position(|&p| p == 0.0), rows.last()) {
            let ok = rows[z]
                .ratio
                .iter()
                .all(|s| s.n == 0 || (s.mean == 1.0 && s.std == 0.0));
            ctx.check(
                format!("{v}: rate-0 shrinkage ratios are 1"),
                false,
                ok,
                "baseline normalization",
            );
            let ok = last.pv.mean < rows[z].pv.mean;
            ctx.check(
                format!("{v}: top rate has smaller prediction variance than rate 0"),
                false,
                ok,
                format!("{:.5} vs {:.5}", last.pv.mean, rows[z].pv.mean),
            );
        }
    }
    ctx.svg(
        "order1_share.svg",
        &share_chart("order-1 share", &cells, &agg, &grid, &variants, 0),
    )?;
    let mut pv = LineChart::new("prediction variance", "dropout rate", "variance");
    for (vi, v) in variants.iter().enumerate() {
        pv = pv.series(
            v.name(),
            (0..n).map(|j| (grid[j], agg[vi * n + j].pv.mean)).collect(),
        );
    }
    ctx.svg("prediction_variance.svg", &pv)
}

pub(crate) fn width_contrast(cfg: &ExperimentConfig, ctx: &mut Ctx) -> Result<()> {
    let setup = NetSetup::from_cfg(cfg)?;
    let (reps, base) = (cfg.usize("reps")?, cfg.u64("seed")?);
    let variants = cfg.variants("variants")?;
    let grid = cfg.f64_list("dropout_grid")?;
    let widths = cfg.usize_list("widths")?;
    let cells = sweep_cells(&widths, &variants, &grid, setup.mode, 0.0, true);
    record_seeds(ctx, base, reps);
    let results = run_cells(&setup, noise_data(cfg)?, &cells, reps, base)?;
    let agg = write_tables(
        ctx,
        &setup,
        &["width", "variant", "rate"],
        &cells,
        &results,
        base,
    )?;
    let labels = setup.order_labels();

    let mut deltas = Table::new(&["width", "variant", "rate", "order", "n", "mean", "std"]);
    for (c, runs) in cells.iter().zip(&results) {
        for (i, l) in labels.iter().enumerate() {
            let s = Stat::of(
                runs.iter()
                    .zip(&results[c.baseline])
                    .map(|(m, b)| m.share(i) - b.share(i)),
            );
            let mut row = c.keys.clone();
            row.extend([l.clone(), s.n.to_string(), f(s.mean), f(s.std)]);
            deltas.push(row);
        }
    }
    ctx.table("share_deltas.csv", &deltas)?;

    let per_width = variants.len() * grid.len();
    let zero = grid.iter().position(|&p| p == 0.0);
    for (wi, w) in widths.iter().enumerate() {
        if let Some(z) = zero {
            let a = &agg[wi * per_width + z];
            let high: f64 = a.share[1..].iter().map(|s| s.mean).sum();
            ctx.check(
                format!("width {w}: rate 0 overfits (order>=2 share > 0.5)"),
                false,
                high > 0.5,
                format!("{high:.4}"),
            );
        }
        ctx.svg(
            &format!("order1_share_w{w}.svg"),
            &share_chart(
                &format!("order-1 share, width {w}"),
                &cells,
                &agg,
                &grid,
                &variants,
                wi * per_width,
            ),
        )?;
    }

    let cw = cfg.usize("contrast_width")?;
    let max_rate = cfg.f64("contrast_max_rate")?;
    let vi = |v: Variant| variants.iter().position(|&x| x == v);
    match (widths.iter().position(|&w| w == cw), vi(Variant::Input), vi(Variant::Activation), zero) {
        (Some(wi), Some(ii), Some(ai), Some(z)) => {
            let rates: Vec<usize> = (0..grid.len()).filter(|&j| grid[j] > 0.0 && grid[j] <= max_rate).collect();
            let gain = |v: usize, r: usize| -> f64 {
                let b = results[wi * per_width + v * grid.len() + z][r].share(0);
                rates
                    .iter()
                    .map(|&j| results[wi * per_width + v * grid.len() + j][r].share(0) - b)
                    .sum::<f64>()
                    / rates.len() as f64
            };
            let wins: Vec<bool> = (0..reps).map(|r| gain(ai, r) < gain(ii, r)).collect();
            let count = wins.iter().filter(|&&b| b).count();
            let detail: Vec<String> = (0..reps).map(|r| format!("{:.3}<{:.3}", gain(ai, r), gain(ii, r))).collect();
            ctx.check(
                format!("width {cw}: activation order-1 gain below input gain at rates <= {max_rate}"),
                true,
                !rates.is_empty() && at_least(count, reps, 4, 5),
                format!("{count}/{reps} reps [{}]", detail.join(", ")),
            );
        }
        _ => ctx.warn("contrast check skipped: needs the contrast width, input and activation variants and rate 0"),
    }
    Ok(())
}

pub(crate) fn weight_decay_sweep(cfg: &ExperimentConfig, ctx: &mut Ctx) -> Result<()> {
    let setup = NetSetup::from_cfg(cfg)?;
    let (reps, base) = (cfg.usize("reps")?, cfg.u64("seed")?);
    let width = cfg.usize("width")?;
    let mut lambdas = cfg.f64_list("lambda_grid")?;
    let (compare, collapse) = (cfg.f64("compare_lambda")?, cfg.f64("collapse_lambda")?);
    for l in [0.0, compare, collapse] {
        if !lambdas.contains(&l) {
            lambdas.push(l);
        }
    }
    let p_ref = cfg.f64("reference_input_rate")?;
    let zero = lambdas.iter().position(|&l| l == 0.0).expect("zero added");
    let mut cells: Vec<Cell> = lambdas
        .iter()
        .map(|&l| Cell {
            keys: vec![f(l), f(0.0)],
            width,
            dropout: DropoutSpec::none().with_mode(setup.mode),
            weight_decay: l,
            baseline: zero,
        })
        .collect();
    cells.push(Cell {
        keys: vec![f(0.0), f(p_ref)],
        width,
        dropout: Variant::Input.spec(p_ref, setup.mode),
        weight_decay: 0.0,
        baseline: zero,
    });
    record_seeds(ctx, base, reps);
    let results = run_cells(&setup, noise_data(cfg)?, &cells, reps, base)?;
    let agg = write_tables(
        ctx,
        &setup,
        &["lambda", "input_rate"],
        &cells,
        &results,
        base,
    )?;

    let at = |l: f64| {
        lambdas
            .iter()
            .position(|&x| x == l)
            .expect("lambda present")
    };
    let pv = agg[at(collapse)].pv.mean;
    ctx.check(
        format!("lambda {collapse}: prediction variance below 0.01"),
        true,
        pv < 0.01,
        format!("{pv:.3e}"),
    );
    let s0 = agg[zero].share[0].mean;
    let shift_l = agg[at(compare)].share[0].mean - s0;
    let shift_p = agg[cells.len() - 1].share[0].mean - s0;
    // constant predictors have no shares, so they drop out of the mean
    let constant = reps - agg[at(compare)].share[0].n;
    ctx.check(
        format!("lambda {compare}: order-1 share shift below input dropout {p_ref}"),
        true,
        shift_l < shift_p,
        format!("{shift_l:.4} vs {shift_p:.4}, {constant}/{reps} reps constant"),
    );
    let live = lambdas
        .iter()
        .enumerate()
        .filter(|&(i, &l)| l > 0.0 && agg[i].share[0].n == reps)
        .max_by(|a, b| a.1.total_cmp(b.1));
    if let Some((i, &l)) = live {
        let shift = agg[i].share[0].mean - s0;
        ctx.check(
            format!("largest non-constant lambda ({l}): order-1 share shift below input dropout {p_ref}"),
            false,
            shift < shift_p,
            format!("{shift:.4} vs {shift_p:.4}"),
        );
    }

    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    order.sort_by(|&a, &b| lambdas[a].total_cmp(&lambdas[b]));
    let pts = |g: &dyn Fn(&Aggregate) -> f64| {
        order
            .iter()
            .map(|&i| (lambdas[i], g(&agg[i])))
            .collect::<Vec<_>>()
    };
    ctx.svg(
        "order1_share.svg",
        &LineChart::new("order-1 share", "weight decay", "share")
            .series("no dropout", pts(&|a| a.share[0].mean)),
    )?;
    ctx.svg(
        "prediction_variance.svg",
        &LineChart::new("prediction variance", "weight decay", "variance")
            .series("no dropout", pts(&|a| a.pv.mean)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(mean: f64, std: f64) -> Stat {
        Stat { n: 3, mean, std }
    }

    #[test]
    fn inversion_rule() {
        assert!(non_decreasing_one_inversion(&[st(0.1, 0.0), st(0.2, 0.0)]).0);
        assert!(non_decreasing_one_inversion(&[st(0.1, 0.0), st(0.3, 0.05), st(0.28, 0.01)]).0);
        assert!(!non_decreasing_one_inversion(&[st(0.1, 0.0), st(0.3, 0.01), st(0.2, 0.01)]).0);
        assert!(!non_decreasing_one_inversion(&[st(0.3, 0.1), st(0.29, 0.1), st(0.28, 0.1)]).0);
        assert!(
            !non_decreasing_one_inversion(&[st(f64::NAN, 0.1), st(0.29, 0.1), st(0.28, 0.1)]).0
        );
    }

    #[test]
    fn baselines_point_at_rate_zero() {
        let cells = sweep_cells(
            &[4, 8],
            &[Variant::Input, Variant::Both],
            &[0.0, 0.5],
            DropoutMode::Plain,
            0.0,
            true,
        );
        let b: Vec<usize> = cells.iter().map(|c| c.baseline).collect();
        assert_eq!(b, vec![0, 0, 2, 2, 4, 4, 6, 6]);
        assert_eq!(cells[5].keys, vec!["8".to_string(), "input".into(), f(0.5)]);
    }
}
