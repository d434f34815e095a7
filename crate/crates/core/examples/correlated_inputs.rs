//! How input correlation moves the variance of `x1 * x2` from the pair
//! effect into main effects.
//!
//! `cargo run --example correlated_inputs`

use std::sync::Arc;

use intxlab::anova::{decompose_weighted, report, tabulate, WeightedGrid};

fn main() -> intxlab::Result<()> {
    println!("{:>6} {:>8} {:>8}", "rho", "main", "pair");
    for rho in [0.0, 0.25, 0.5, 0.75, 0.9, 0.99] {
        let grid = Arc::new(WeightedGrid::bivariate_gaussian(rho, 41)?);
        let f = tabulate(|x| x[0] * x[1], grid)?;
        let shares = report(&decompose_weighted(&f, 2)?)
            .order_shares()
            .unwrap_or_default();
        println!("{rho:>6} {:>8.4} {:>8.4}", shares[0], shares[1]);
    }
    Ok(())
}
