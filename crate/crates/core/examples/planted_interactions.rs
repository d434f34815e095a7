//! Classification data whose label depends on a planted k-way
//! interaction of extra features.
//!
//! `cargo run --example planted_interactions`

use intxlab::datagen::{gen_planted_with_base, planted_label};

fn main() -> intxlab::Result<()> {
    let (d_base, c_base) = (10, 4);
    for k in 1..=3 {
        let (ds, base) = gen_planted_with_base(4000, d_base, c_base, k, 0.35, 11)?;
        let labels = ds.labels().unwrap_or_default();
        let mut planted = 0;
        for i in 0..ds.n() {
            assert_eq!(
                labels[i],
                planted_label(base[i], &ds.row(i)[d_base..], c_base)
            );
            planted += usize::from(labels[i] == c_base);
        }
        println!(
            "k={k}: {planted} of {} rows carry the planted class (expected share {})",
            ds.n(),
            0.5f64.powi(k as i32)
        );
    }
    let (ds, base) = gen_planted_with_base(6, d_base, c_base, 2, 0.35, 12)?;
    for i in 0..ds.n() {
        println!(
            "base {} extras {:+.2?} label {}",
            base[i],
            &ds.row(i)[d_base..],
            ds.labels().unwrap_or_default()[i]
        );
    }
    Ok(())
}
