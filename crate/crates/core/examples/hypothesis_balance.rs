//! Effective learning rate against the number of order-k hypotheses.
//!
//! `cargo run --example hypothesis_balance`

use intxlab::theory::balance_curve;

fn main() -> intxlab::Result<()> {
    for p in [0.1, 0.5] {
        println!("p = {p}");
        for b in balance_curve(25, p, 8)? {
            println!(
                "  k={} rate {:.4} count {} product {:.1}",
                b.k, b.rate, b.count, b.product
            );
        }
    }
    Ok(())
}
