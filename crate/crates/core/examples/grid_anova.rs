//! Exact functional ANOVA of a tabulated function.
//!
//! `cargo run --example grid_anova`

use std::sync::Arc;

use intxlab::anova::{decompose_product, report, tabulate, WeightedGrid};

fn main() -> intxlab::Result<()> {
    let grid = Arc::new(WeightedGrid::uniform_midpoint(-1.0, 1.0, 41, 3)?);
    let f = tabulate(
        |x| x[0].sin() + x[0] * x[1] + 0.5 * x[0] * x[1] * x[2],
        grid,
    )?;
    let effects = decompose_product(&f)?;
    println!(
        "reconstruction error {:.1e}",
        effects.reconstruction_error(&f)
    );
    println!(
        "orthogonality violation {:.1e}",
        effects.orthogonality_violation(50, 1)
    );

    let r = report(&effects);
    for (u, v) in &r.variance_by_subset {
        if *v > 1e-12 {
            println!("{{{u}}}: variance {v:.5}");
        }
    }
    for (k, s) in r.order_shares().unwrap_or_default().iter().enumerate() {
        println!("order {} share {s:.3}", k + 1);
    }
    Ok(())
}
