use rayon::prelude::*;

use super::config::{ExperimentConfig, Variant};
use super::svg::LineChart;
use super::sweep::{rep_seed, NetSetup};
use super::table::{f, Stat, Table};
use super::{at_least, Ctx};
use crate::datagen::{gen_signal, GeneratorKind};
use crate::distill::EffectSizeReport;
use crate::error::Result;
use crate::mlp::{mse, train, MlpConfig, MlpModel};
use crate::seed;

struct TraceRun {
    train_loss: Vec<f64>,
    heldout_loss: Vec<f64>,
    diverged: Option<(usize, f64)>,
    target_variance: f64,
    /// `(epoch, losses at that epoch, effect sizes)`, epoch 0 first.
    points: Vec<(usize, f64, f64, EffectSizeReport)>,
}

impl TraceRun {
    /// Share of orders above `order` at each checkpoint.
    fn high_share(&self, order: usize) -> Vec<(usize, f64)> {
        self.points
            .iter()
            .map(|(e, _, _, r)| {
                (
                    *e,
                    r.shares.as_ref().map_or(0.0, |s| s[order..].iter().sum()),
                )
            })
            .collect()
    }
}

/// First checkpoint at which `series` rises to `threshold` after having been
/// below it; the first checkpoint if it never was below, `None` if it never
/// comes back up.
pub(crate) fn crossing_epoch(series: &[(usize, f64)], threshold: f64) -> Option<usize> {
    let mut below = false;
    for &(e, s) in series {
        if s < threshold {
            below = true;
        } else if below {
            return Some(e);
        }
    }
    if below {
        None
    } else {
        series.first().map(|p| p.0)
    }
}

/// Strictly later, with "never" later than any epoch.
pub(crate) fn later(a: Option<usize>, b: Option<usize>) -> bool {
    match (a, b) {
        (None, Some(_)) => true,
        (Some(x), Some(y)) => x > y,
        _ => false,
    }
}

fn run_one(
    setup: &NetSetup,
    cfg: &ExperimentConfig,
    g: GeneratorKind,
    rate: f64,
    rs: u64,
) -> Result<TraceRun> {
    let sigma = cfg.f64("sigma")?;
    let gs = seed::derive_named(rs, g.name());
    let data = gen_signal(
        g,
        cfg.usize("n_train")?,
        sigma,
        seed::derive_named(gs, "train"),
    )?;
    let held = gen_signal(
        g,
        cfg.usize("n_heldout")?,
        sigma,
        seed::derive_named(gs, "heldout"),
    )?;
    let d = data.d();
    let mut model = MlpModel::init(
        MlpConfig::regression(d, vec![cfg.usize("width")?; setup.layers]),
        seed::derive_named(gs, "init"),
    )?;
    let variant: Variant = cfg.raw("variant")?.parse()?;
    let mut tc = setup.train_config(variant.spec(rate, setup.mode), 0.0, gs);
    tc.checkpoint_every = Some(cfg.usize("checkpoint_every")?);
    let initial = model.clone();
    let trace = train(&mut model, &data, Some(&held), &tc)?;
    let mut points = Vec::new();
    if trace.diverged.is_none() {
        let snaps =
            std::iter::once((0, &initial)).chain(trace.snapshots.iter().map(|(e, m)| (*e, m)));
        for (e, m) in snaps {
            let (tr, ho) = if e == 0 {
                (mse(m, &data)?, mse(m, &held)?)
            } else {
                (trace.train_loss[e - 1], trace.heldout_loss[e - 1])
            };
            points.push((e, tr, ho, setup.measure(m, d, gs, "")?));
        }
    }
    let y = data.targets().expect("regression");
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    Ok(TraceRun {
        train_loss: trace.train_loss,
        heldout_loss: trace.heldout_loss,
        diverged: trace.diverged,
        target_variance: y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64,
        points,
    })
}

pub(crate) fn epochs_trace(cfg: &ExperimentConfig, ctx: &mut Ctx) -> Result<()> {
    let setup = NetSetup::from_cfg(cfg)?;
    let (reps, base) = (cfg.usize("reps")?, cfg.u64("seed")?);
    let gens = cfg.generators("generators")?;
    let grid = cfg.f64_list("dropout_grid")?;
    let threshold = cfg.f64("crossing_share")?;
    for r in 0..reps {
        ctx.seed(format!("rep {r}"), rep_seed(base, r));
    }
    let jobs: Vec<(usize, usize, usize)> = (0..gens.len())
        .flat_map(|g| (0..grid.len()).flat_map(move |p| (0..reps).map(move |r| (g, p, r))))
        .collect();
    let runs: Vec<TraceRun> = jobs
        .par_iter()
        .map(|&(g, p, r)| run_one(&setup, cfg, gens[g], grid[p], rep_seed(base, r)))
        .collect::<Result<_>>()?;
    let at = |g: usize, p: usize, r: usize| &runs[(g * grid.len() + p) * reps + r];
    let labels = setup.order_labels();
    let k = labels.len();

    let mut header: Vec<String> = [
        "generator",
        "rate",
        "rep",
        "epoch",
        "train_loss",
        "heldout_loss",
        "prediction_variance",
    ]
    .map(String::from)
    .to_vec();
    for prefix in ["var", "share"] {
        header.extend(labels.iter().map(|l| format!("{prefix}_{l}")));
    }
    let mut trace = Table::new(&header);
    let mut losses = Table::new(&[
        "generator",
        "rate",
        "rep",
        "epoch",
        "train_loss",
        "heldout_loss",
    ]);
    let mut summary = Table::new(&["generator", "rate", "epoch", "order", "n", "mean", "std"]);
    let mut crossings = Table::new(&[
        "generator",
        "rate",
        "rep",
        "crossing_epoch",
        "best_epoch",
        "best_heldout",
    ]);
    for (gi, g) in gens.iter().enumerate() {
        for (pi, &p) in grid.iter().enumerate() {
            let order = g.nominal_order().expect("signal generator");
            for r in 0..reps {
                let run = at(gi, pi, r);
                if let Some((e, l)) = run.diverged {
                    ctx.warn(format!(
                        "{g} rate {p} rep {r}: diverged at epoch {e} (loss {l}); excluded"
                    ));
                }
                let keys = [g.name().to_string(), f(p), r.to_string()];
                for (e, tr, ho, rep) in &run.points {
                    let mut row = keys.to_vec();
                    row.extend([e.to_string(), f(*tr), f(*ho), f(rep.prediction_variance)]);
                    row.extend(rep.variance.iter().map(|v| f(*v)));
                    row.extend((0..k).map(|i| f(rep.shares.as_ref().map_or(f64::NAN, |s| s[i]))));
                    trace.push(row);
                }
                for (i, (tr, ho)) in run.train_loss.iter().zip(&run.heldout_loss).enumerate() {
                    let mut row = keys.to_vec();
                    row.extend([(i + 1).to_string(), f(*tr), f(*ho)]);
                    losses.push(row);
                }
                let cross = crossing_epoch(&run.high_share(order), threshold);
                let best = best_epoch(&run.heldout_loss);
                let mut row = keys.to_vec();
                row.extend([
                    cross.map_or("never".into(), |e| e.to_string()),
                    best.map_or("".into(), |(e, _)| e.to_string()),
                    f(best.map_or(f64::NAN, |b| b.1)),
                ]);
                crossings.push(row);
            }
            let ok: Vec<&TraceRun> = (0..reps)
                .map(|r| at(gi, pi, r))
                .filter(|t| t.diverged.is_none())
                .collect();
            if let Some(first) = ok.first() {
                for (j, (e, ..)) in first.points.iter().enumerate() {
                    for (i, l) in labels.iter().enumerate() {
                        let s = Stat::of(
                            ok.iter()
                                .map(|t| t.points[j].3.shares.as_ref().map_or(f64::NAN, |s| s[i])),
                        );
                        summary.push(vec![
                            g.name().into(),
                            f(p),
                            e.to_string(),
                            l.clone(),
                            s.n.to_string(),
                            f(s.mean),
                            f(s.std),
                        ]);
                    }
                }
            }
        }
    }
    ctx.table("trace.csv", &trace)?;
    ctx.table("losses.csv", &losses)?;
    ctx.table("trace_summary.csv", &summary)?;
    ctx.table("crossings.csv", &crossings)?;

    let zero = grid.iter().position(|&p| p == 0.0);
    let positive = grid.iter().position(|&p| p > 0.0);
    for (gi, g) in gens.iter().enumerate() {
        let order = g.nominal_order().expect("signal generator");
        if let Some(z) = zero {
            let ok: Vec<&TraceRun> = (0..reps)
                .map(|r| at(gi, z, r))
                .filter(|t| t.diverged.is_none())
                .collect();
            let curve = mean_curve(ok.iter().map(|t| t.heldout_loss.as_slice()));
            let rise = match (best_epoch(&curve), curve.last()) {
                (Some((e, m)), Some(&last)) if e < curve.len() => Some((e, last - m, last)),
                _ => None,
            };
            let passed = rise.is_some_and(|(_, up, last)| up >= 0.01 * last);
            ctx.check(
                format!("{g}: rate 0 held-out MSE has an interior minimum"),
                true,
                passed,
                rise.map_or("no interior minimum".into(), |(e, up, last)| {
                    format!(
                        "best epoch {e} of {}, final exceeds best by {:.2}%",
                        curve.len(),
                        100.0 * up / last
                    )
                }),
            );
            let small = ok.iter().all(|t| {
                t.points
                    .first()
                    .is_some_and(|p| p.3.prediction_variance < 0.05 * t.target_variance)
            });
            ctx.check(
                format!("{g}: epoch-0 prediction variance below 5% of target variance"),
                false,
                small,
                "",
            );
            if order == 1 && ok.len() == reps {
                ctx.check(
                    format!("{g}: rate 0 main effects grow before order-3 share exceeds 10%"),
                    false,
                    simple_first(&ok),
                    "",
                );
            }
        }
        for (pi, &p) in grid.iter().enumerate() {
            let Some(z) = zero else { break };
            if p == 0.0 {
                continue;
            }
            let cz: Vec<Option<usize>> = (0..reps)
                .map(|r| cross_of(at(gi, z, r), order, threshold))
                .collect();
            let cp: Vec<Option<usize>> = (0..reps)
                .map(|r| cross_of(at(gi, pi, r), order, threshold))
                .collect();
            let clean =
                |r: usize| at(gi, z, r).diverged.is_none() && at(gi, pi, r).diverged.is_none();
            let count = (0..reps)
                .filter(|&r| clean(r) && later(cp[r], cz[r]))
                .count();
            let show = |v: &[Option<usize>]| {
                v.iter()
                    .map(|c| c.map_or("never".into(), |e| e.to_string()))
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            ctx.check(
                format!(
                    "{g}: order>={} share crosses {threshold} later at rate {p} than at 0",
                    order + 1
                ),
                Some(pi) == positive,
                at_least(count, reps, 7, 10),
                format!(
                    "{count}/{reps} reps; rate {p}: [{}], rate 0: [{}]",
                    show(&cp),
                    show(&cz)
                ),
            );
            let best = |pi: usize| {
                Stat::of(
                    (0..reps)
                        .map(|r| best_epoch(&at(gi, pi, r).heldout_loss).map_or(f64::NAN, |b| b.1)),
                )
            };
            let (bp, bz) = (best(pi), best(z));
            ctx.check(
                format!("{g}: best held-out MSE at rate {p} no worse than at 0"),
                false,
                bp.mean <= bz.mean,
                format!("{:.5} vs {:.5}", bp.mean, bz.mean),
            );
        }
        let mut chart = LineChart::new(&format!("{g}: order>{order} share"), "epoch", "share");
        for (pi, &p) in grid.iter().enumerate() {
            let ok: Vec<&TraceRun> = (0..reps)
                .map(|r| at(gi, pi, r))
                .filter(|t| t.diverged.is_none())
                .collect();
            if let Some(first) = ok.first() {
                let pts = (0..first.points.len())
                    .map(|j| {
                        (
                            first.points[j].0 as f64,
                            Stat::of(ok.iter().map(|t| t.high_share(order)[j].1)).mean,
                        )
                    })
                    .collect();
                chart = chart.series(&format!("rate {p}"), pts);
            }
        }
        ctx.svg(&format!("trace_{}.svg", g.name()), &chart)?;
    }
    Ok(())
}

fn cross_of(t: &TraceRun, order: usize, threshold: f64) -> Option<usize> {
    crossing_epoch(&t.high_share(order), threshold)
}

/// `(1-based epoch, loss)` of the smallest finite loss.
fn best_epoch(losses: &[f64]) -> Option<(usize, f64)> {
    losses
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i + 1, *v))
}

fn mean_curve<'a>(curves: impl Iterator<Item = &'a [f64]>) -> Vec<f64> {
    let curves: Vec<&[f64]> = curves.collect();
    let n = curves.iter().map(|c| c.len()).min().unwrap_or(0);
    (0..n)
        .map(|i| curves.iter().map(|c| c[i]).sum::<f64>() / curves.len() as f64)
        .collect()
}

/// Mean order-1 variance reaches half its peak no later than the mean
/// order-3 share first exceeds 10% (epoch 0 excluded).
fn simple_first(runs: &[&TraceRun]) -> bool {
    let n = runs[0].points.len();
    let mean = |j: usize, pick: &dyn Fn(&EffectSizeReport) -> f64| {
        runs.iter().map(|t| pick(&t.points[j].3)).sum::<f64>() / runs.len() as f64
    };
    let v1: Vec<f64> = (0..n).map(|j| mean(j, &|r| r.variance[0])).collect();
    let peak = v1.iter().cloned().fold(0.0, f64::max);
    let e1 = (1..n).find(|&j| v1[j] >= 0.5 * peak);
    let e3 = (1..n).find(|&j| {
        mean(j, &|r| {
            r.shares
                .as_ref()
                .map_or(0.0, |s| s.get(2).copied().unwrap_or(0.0))
        }) > 0.1
    });
    match (e1, e3) {
        (_, None) => true,
        (Some(a), Some(b)) => a <= b,
        (None, Some(_)) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_rules() {
        let s = |v: &[f64]| {
            v.iter()
                .enumerate()
                .map(|(i, &x)| (i * 10, x))
                .collect::<Vec<_>>()
        };
        assert_eq!(crossing_epoch(&s(&[0.5, 0.05, 0.02, 0.2]), 0.1), Some(30));
        assert_eq!(crossing_epoch(&s(&[0.5, 0.3]), 0.1), Some(0));
        assert_eq!(crossing_epoch(&s(&[0.5, 0.05, 0.02]), 0.1), None);
        assert!(later(None, Some(5)));
        assert!(later(Some(6), Some(5)));
        assert!(!later(Some(5), Some(5)));
        assert!(!later(None, None));
        assert!(!later(Some(5), None));
    }

    #[test]
    fn best_and_mean() {
        assert_eq!(best_epoch(&[3.0, 1.0, f64::NAN, 2.0]), Some((2, 1.0)));
        assert_eq!(
            mean_curve([&[1.0, 3.0][..], &[3.0, 5.0, 7.0][..]].into_iter()),
            vec![2.0, 4.0]
        );
    }
}
