//! Monte Carlo checks that plain input dropout scales an order-k term,
//! and its gradient, by `(1 - p)^k`.
//!
//! `cargo run --example theorem_checks`

use intxlab::anova::Subset;
use intxlab::theory::{verify_theorem1, verify_theorem2, BasisModel};

fn main() -> intxlab::Result<()> {
    let s = Subset::from_indices;
    let model = BasisModel::new(
        3,
        vec![(s(&[0]), 0.5), (s(&[1, 2]), -0.4), (s(&[0, 1, 2]), 0.3)],
    )?;
    let target = BasisModel::new(
        3,
        vec![(s(&[0]), 1.0), (s(&[1, 2]), 1.0), (s(&[0, 1, 2]), 1.0)],
    )?;
    let data = BasisModel::sample_dataset(&target, 2000, 0.1, 1)?;
    for p in [0.2, 0.5] {
        for (name, r) in [
            ("term", verify_theorem1(&model, p, 20, 100_000, 2)?),
            ("gradient", verify_theorem2(&model, &data, p, 200_000, 3)?),
        ] {
            for row in &r.rows {
                println!(
                    "p={p} {name:>8} {{{}}}: expected {:.4}, estimate {:.4} +- {:.4}",
                    row.subset, row.theoretical, row.estimate, row.stderr
                );
            }
        }
    }
    Ok(())
}
