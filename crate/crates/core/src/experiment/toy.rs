use std::sync::Arc;

use super::config::ExperimentConfig;
use super::table::{f, Table};
use super::Ctx;
use crate::anova::{decompose_weighted, report, tabulate, Subset, WeightedGrid};
use crate::error::Result;

/// Exact weighted ANOVA of `x1 * x2` under correlated Gaussian inputs.
pub(crate) fn toy_decomposition(cfg: &ExperimentConfig, ctx: &mut Ctx) -> Result<()> {
    let n = cfg.usize("grid_n")?;
    let mut shares_t = Table::new(&["rho", "order", "variance", "share"]);
    for rho in cfg.f64_list("rhos")? {
        let grid = Arc::new(WeightedGrid::bivariate_gaussian(rho, n)?);
        let func = tabulate(|x| x[0] * x[1], grid.clone())?;
        let table = decompose_weighted(&func, 2)?;
        let rep = report(&table);
        let shares = rep.order_shares().unwrap_or_else(|| vec![f64::NAN; 2]);
        for (k, (v, s)) in rep.variance_by_order.iter().zip(&shares).enumerate() {
            shares_t.push(vec![f(rho), (k + 1).to_string(), f(*v), f(*s)]);
        }

        let w = grid.tensor_weights();
        let e = |u: &[usize]| {
            table
                .expand(Subset::from_indices(u))
                .expect("stored effect")
        };
        let (e0, e1, e01) = (e(&[0]), e(&[1]), e(&[0, 1]));
        let mut pane = Table::new(&["x1", "x2", "weight", "f", "constant", "f_1", "f_2", "f_12"]);
        for i in 0..grid.len() {
            let p = grid.point(i);
            pane.push(vec![
                f(p[0]),
                f(p[1]),
                f(w[i]),
                f(func.values()[i]),
                f(table.constant()),
                f(e0[i]),
                f(e1[i]),
                f(e01[i]),
            ]);
        }
        ctx.table(&format!("effects_rho_{rho}.csv"), &pane)?;

        let sum: f64 = shares.iter().sum();
        ctx.check(
            format!("rho {rho}: shares sum to 1"),
            false,
            (sum - 1.0).abs() <= 1e-8,
            format!("{sum:.12}"),
        );
        if rho.abs() <= 0.01 {
            ctx.check(
                format!("rho {rho}: pair share >= 0.95"),
                true,
                shares[1] >= 0.95,
                format!("{:.4}", shares[1]),
            );
        }
        if rho.abs() >= 0.99 {
            ctx.check(
                format!("rho {rho}: main-effect share >= 0.80"),
                true,
                shares[0] >= 0.80,
                format!("{:.4}", shares[0]),
            );
        }
    }
    ctx.table("shares.csv", &shares_t)
}
