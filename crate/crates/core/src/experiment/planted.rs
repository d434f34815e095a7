use rayon::prelude::*;

use super::config::{ExperimentConfig, Variant};
use super::svg::LineChart;
use super::sweep::NetSetup;
use super::table::{f, Stat, Table};
use super::Ctx;
use crate::datagen::gen_planted_with_base;
use crate::error::Result;
use crate::mlp::{accuracy, train, MlpConfig, MlpModel};
use crate::seed;

struct Planted {
    epochs: usize,
    train_loss: f64,
    accuracy: f64,
    diverged: bool,
}

fn run_one(
    cfg: &ExperimentConfig,
    setup: &NetSetup,
    k: usize,
    rate: f64,
    rs: u64,
) -> Result<Planted> {
    let (n_train, n_test) = (cfg.usize("n_train")?, cfg.usize("n_test")?);
    let c_base = cfg.usize("c_base")?;
    let (all, _) = gen_planted_with_base(
        n_train + n_test,
        cfg.usize("d_base")?,
        c_base,
        k,
        cfg.f64("spread")?,
        seed::derive_named(rs, &format!("data k{k}")),
    )?;
    let (data, test) = all.split_at(n_train)?;
    let mc = MlpConfig::classification(
        data.d(),
        vec![cfg.usize("width")?; setup.layers],
        c_base + 1,
    );
    let mut model = MlpModel::init(mc, seed::derive_named(rs, &format!("init k{k}")))?;
    let variant: Variant = cfg.raw("variant")?.parse()?;
    let tc = setup.train_config(
        variant.spec(rate, setup.mode),
        0.0,
        seed::derive_named(rs, &format!("k{k}")),
    );
    let trace = train(&mut model, &data, None, &tc)?;
    Ok(Planted {
        epochs: trace.epochs_run(),
        train_loss: trace.train_loss.last().copied().unwrap_or(f64::NAN),
        accuracy: if trace.diverged.is_some() {
            f64::NAN
        } else {
            accuracy(&model, &test)?
        },
        diverged: trace.diverged.is_some(),
    })
}

/// Index of the largest finite mean; ties go to the lower rate.
fn argmax(stats: &[Stat]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in stats.iter().enumerate() {
        if s.mean.is_finite() && best.map_or(true, |b| s.mean > stats[b].mean) {
            best = Some(i);
        }
    }
    best
}

pub(crate) fn planted_sweep(cfg: &ExperimentConfig, ctx: &mut Ctx) -> Result<()> {
    let mut setup = NetSetup::from_cfg(cfg)?;
    setup.patience = None;
    let (reps, metas, base) = (
        cfg.usize("reps")?,
        cfg.usize("meta_reps")?,
        cfg.u64("seed")?,
    );
    let ks = cfg.usize_list("k_grid")?;
    let grid = cfg.f64_list("dropout_grid")?;
    let seed_of = |m: usize, r: usize| seed::derive(seed::derive(base, m as u64), r as u64);
    for m in 0..metas {
        for r in 0..reps {
            ctx.seed(format!("meta {m} rep {r}"), seed_of(m, r));
        }
    }
    let jobs: Vec<(usize, usize, usize, usize)> = (0..metas)
        .flat_map(|m| {
            let (nk, np) = (ks.len(), grid.len());
            (0..nk)
                .flat_map(move |k| (0..np).flat_map(move |p| (0..reps).map(move |r| (m, k, p, r))))
        })
        .collect();
    let runs: Vec<Planted> = jobs
        .par_iter()
        .map(|&(m, k, p, r)| run_one(cfg, &setup, ks[k], grid[p], seed_of(m, r)))
        .collect::<Result<_>>()?;

    let mut raw = Table::new(&[
        "meta",
        "k",
        "rate",
        "rep",
        "seed",
        "status",
        "epochs",
        "train_loss",
        "test_accuracy",
    ]);
    for (&(m, k, p, r), run) in jobs.iter().zip(&runs) {
        if run.diverged {
            ctx.warn(format!(
                "meta {m} k {} rate {} rep {r}: diverged; excluded",
                ks[k], grid[p]
            ));
        }
        raw.push(vec![
            m.to_string(),
            ks[k].to_string(),
            f(grid[p]),
            r.to_string(),
            seed_of(m, r).to_string(),
            if run.diverged { "diverged" } else { "ok" }.into(),
            run.epochs.to_string(),
            f(run.train_loss),
            f(run.accuracy),
        ]);
    }
    ctx.table("runs.csv", &raw)?;

    let cell = |m: usize, k: usize, p: usize| {
        let start = ((m * ks.len() + k) * grid.len() + p) * reps;
        Stat::of(runs[start..start + reps].iter().map(|r| r.accuracy))
    };
    let mut acc = Table::new(&["meta", "k", "rate", "n", "mean", "std"]);
    let mut best_t = Table::new(&["meta", "k", "best_rate", "best_mean"]);
    let mut monotone = 0;
    let mut top_wins = Vec::new();
    let mut top_below_max = true;
    let mut k2_gaps = Vec::new();
    let top = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut chart = LineChart::new("test accuracy, meta 0", "dropout rate", "accuracy");
    for m in 0..metas {
        let mut best_rates = Vec::new();
        for (ki, &k) in ks.iter().enumerate() {
            let row: Vec<Stat> = (0..grid.len()).map(|p| cell(m, ki, p)).collect();
            for (p, s) in row.iter().enumerate() {
                acc.push(vec![
                    m.to_string(),
                    k.to_string(),
                    f(grid[p]),
                    s.n.to_string(),
                    f(s.mean),
                    f(s.std),
                ]);
            }
            let b = argmax(&row);
            best_t.push(vec![
                m.to_string(),
                k.to_string(),
                f(b.map_or(f64::NAN, |b| grid[b])),
                f(b.map_or(f64::NAN, |b| row[b].mean)),
            ]);
            best_rates.push(b.map(|b| grid[b]));
            if b.is_some_and(|b| grid[b] == top) {
                top_wins.push(format!("meta {m} k {k}"));
            }
            if k == 2 {
                if let (Some(b), Some(t)) = (b, grid.iter().position(|&p| p == top)) {
                    top_below_max &= row[t].mean < row[b].mean;
                    k2_gaps.push(format!("{:.3}", row[b].mean - row[t].mean));
                }
            }
            if m == 0 {
                chart = chart.series(
                    &format!("k={k}"),
                    grid.iter().zip(&row).map(|(&p, s)| (p, s.mean)).collect(),
                );
            }
        }
        let ok =
            best_rates.iter().all(Option::is_some) && best_rates.windows(2).all(|w| w[1] <= w[0]);
        monotone += usize::from(ok);
    }
    ctx.table("accuracy.csv", &acc)?;
    ctx.table("best_rate.csv", &best_t)?;
    ctx.svg("accuracy.svg", &chart)?;

    ctx.check(
        "best rate non-increasing in k",
        true,
        2 * monotone > metas,
        format!("{monotone}/{metas} meta-repetitions"),
    );
    ctx.check(
        format!("rate {top} never best"),
        true,
        top_wins.is_empty(),
        if top_wins.is_empty() {
            "no row".into()
        } else {
            top_wins.join("; ")
        },
    );
    if ks.contains(&2) {
        ctx.check(
            format!("k=2: rate {top} below the row maximum"),
            false,
            top_below_max,
            format!("accuracy gap per meta-repetition [{}]", k2_gaps.join(", ")),
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_lower_rate_on_ties() {
        let s = |mean| Stat {
            n: 1,
            mean,
            std: 0.0,
        };
        assert_eq!(argmax(&[s(0.1), s(0.3), s(0.3)]), Some(1));
        assert_eq!(argmax(&[s(f64::NAN), s(0.2)]), Some(1));
        assert_eq!(argmax(&[s(f64::NAN)]), None);
    }
}
