use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::svg::LineChart;
use super::table::{f, Table};
use super::Ctx;
use crate::anova::Subset;
use crate::error::Result;
use crate::seed;
use crate::theory::{
    balance_curve as curve, verify_theorem1, verify_theorem2, BasisModel, TheoremReport,
};

pub(crate) fn balance_curve(cfg: &ExperimentConfig, ctx: &mut Ctx) -> Result<()> {
    let n = cfg.usize("n_features")?;
    let k_max = cfg.usize("k_max")?.min(n);
    let linear = cfg.usize("linear_k_max")?;
    let header = ["p", "k", "rate", "count", "product"];
    let (mut full, mut lin) = (Table::new(&header), Table::new(&header));
    let mut log_chart = LineChart::new(&format!("balance, N = {n}"), "order k", "rate x count");
    log_chart.log_y = true;
    let mut lin_chart = LineChart::new(
        &format!("balance, N = {n}, low orders"),
        "order k",
        "rate x count",
    );
    for p in cfg.f64_list("p_grid")? {
        let pts = curve(n, p, k_max)?;
        for b in &pts {
            let row = vec![
                f(p),
                b.k.to_string(),
                f(b.rate),
                b.count.to_string(),
                f(b.product),
            ];
            if b.k <= linear {
                lin.push(row.clone());
            }
            full.push(row);
            if n == 25 && p == 0.5 && b.k == 3 {
                ctx.check(
                    "N=25, p=0.5: k=3 product is 287.5",
                    false,
                    b.product == 287.5,
                    f(b.product),
                );
            }
        }
        let series: Vec<(f64, f64)> = pts.iter().map(|b| (b.k as f64, b.product)).collect();
        log_chart = log_chart.series(&format!("p={p}"), series.clone());
        lin_chart = lin_chart.series(
            &format!("p={p}"),
            series
                .into_iter()
                .filter(|(k, _)| *k <= linear as f64)
                .collect(),
        );
    }
    ctx.table("balance.csv", &full)?;
    ctx.table("balance_linear.csv", &lin)?;
    ctx.svg("balance_log.svg", &log_chart)?;
    ctx.svg("balance_linear.svg", &lin_chart)
}

/// Subset `{0, ..., k-1}`.
fn leading(k: usize) -> Subset {
    Subset::full(k)
}

/// Theorem 1 and 2 verifiers over every (rate, repetition, order).
pub(crate) fn theorems(cfg: &ExperimentConfig, ctx: &mut Ctx) -> Result<()> {
    let (reps, base) = (cfg.usize("reps")?, cfg.u64("seed")?);
    let rates = cfg.f64_list("theorem_p")?;
    let orders = cfg.usize_list("orders")?;
    let (n_masks, n_points, n_samples) = (
        cfg.usize("n_masks")?,
        cfg.usize("n_points")?,
        cfg.usize("n_samples")?,
    );
    let noise = cfg.f64("data_noise")?;
    let dim = orders.iter().copied().max().unwrap_or(1);
    for r in 0..reps {
        ctx.seed(format!("rep {r}"), seed::derive(base, r as u64));
    }
    // data target: one unit-coefficient term per order
    let target = BasisModel::new(dim, orders.iter().map(|&k| (leading(k), 1.0)).collect())?;
    let no = orders.len();
    let jobs: Vec<(usize, usize, usize)> = (0..rates.len())
        .flat_map(|p| (0..reps).flat_map(move |r| (0..no).map(move |k| (p, r, k))))
        .collect();
    let reports: Vec<(TheoremReport, TheoremReport)> = jobs
        .par_iter()
        .map(|&(p, r, k)| {
            let rs = seed::derive(base, r as u64);
            let u = leading(orders[k]);
            let t1 = verify_theorem1(
                &BasisModel::monomial(dim, u, 1.0)?,
                rates[p],
                n_points,
                n_masks,
                seed::derive_named(rs, &format!("t1 p{p} k{k}")),
            )?;
            let data = BasisModel::sample_dataset(
                &target,
                n_samples,
                noise,
                seed::derive_named(rs, "t2 data"),
            )?;
            let t2 = verify_theorem2(
                &BasisModel::monomial(dim, u, 0.2)?,
                &data,
                rates[p],
                n_masks,
                seed::derive_named(rs, &format!("t2 p{p} k{k}")),
            )?;
            Ok((t1, t2))
        })
        .collect::<Result<_>>()?;

    for (which, name) in [(0, "theorem1"), (1, "theorem2")] {
        let mut t = Table::new(&[
            "p",
            "rep",
            "seed",
            "subset",
            "order",
            "theoretical",
            "estimate",
            "stderr",
            "pass",
        ]);
        let (mut failed, mut total) = (Vec::new(), 0);
        for (&(p, r, _), rep) in jobs.iter().zip(&reports) {
            let report = if which == 0 { &rep.0 } else { &rep.1 };
            for row in &report.rows {
                total += 1;
                if row.pass != Some(true) {
                    failed.push(format!("p={} rep {r} {{{}}}", rates[p], row.subset));
                }
                t.push(vec![
                    f(rates[p]),
                    r.to_string(),
                    seed::derive(base, r as u64).to_string(),
                    row.subset.to_string(),
                    row.order.to_string(),
                    f(row.theoretical),
                    f(row.estimate),
                    f(row.stderr),
                    row.pass.map_or("undefined".into(), |b| b.to_string()),
                ]);
            }
        }
        ctx.table(&format!("{name}.csv"), &t)?;
        let detail = if failed.is_empty() {
            format!("{total}/{total} rows within 3 standard errors")
        } else {
            format!(
                "{} of {total} rows failed: {}",
                failed.len(),
                failed.join("; ")
            )
        };
        ctx.check(
            format!("{name}: every row within 3 standard errors"),
            true,
            failed.is_empty(),
            detail,
        );
    }
    Ok(())
}
