use intxlab::anova::Subset;
use intxlab::seed;
use ndarray::Array2;
use rand::Rng;

/// Sum over random subsets of products of random waves, one per member axis.
pub fn random_function(d: usize, seed: u64) -> impl Fn(&[f64]) -> f64 {
    let mut rng = seed::rng(seed);
    let terms: Vec<(Subset, f64, Vec<(f64, f64)>)> = Subset::all(d)
        .into_iter()
        .map(|u| {
            let coef = rng.gen_range(-1.0..1.0);
            let waves = (0..d)
                .map(|_| (rng.gen_range(0.5..3.0), rng.gen_range(-1.0..1.0)))
                .collect();
            (u, coef, waves)
        })
        .collect();
    move |x: &[f64]| {
        terms
            .iter()
            .map(|(u, c, w)| {
                c * u
                    .indices()
                    .iter()
                    .map(|&i| (w[i].0 * x[i] + w[i].1).sin())
                    .product::<f64>()
            })
            .sum()
    }
}

pub fn uniform_rows(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = seed::rng(seed);
    Array2::from_shape_simple_fn((n, d), || rng.gen_range(-1.0..1.0))
}
