//! Attribute a trained network's variance to interaction orders by
//! depth-staged boosting on fresh inputs.
//!
//! `cargo run --example distill_network`

use intxlab::datagen::{gen_signal, GeneratorKind};
use intxlab::distill::{distill, DistillConfig};
use intxlab::mlp::{train, MlpConfig, MlpModel, TrainConfig};
use intxlab::seed;
use ndarray::Array2;
use rand::Rng;

fn main() -> intxlab::Result<()> {
    let data = gen_signal(GeneratorKind::PairEffects, 1500, 0.1, 3)?;
    let mut model = MlpModel::init(MlpConfig::regression(data.d(), vec![32, 32]), 4)?;
    let cfg = TrainConfig {
        epochs: 60,
        patience: None,
        ..TrainConfig::default()
    };
    train(&mut model, &data, None, &cfg)?;

    let mut rng = seed::rng(5);
    let mut inputs = |n| Array2::from_shape_simple_fn((n, data.d()), || rng.gen_range(-1.0..1.0));
    let (fit_x, eval_x) = (inputs(1500), inputs(2000));
    let staged = distill(
        |x| model.predict_scalar(x),
        &fit_x,
        &DistillConfig::default(),
    )?;
    let r = staged.effect_sizes(|x| model.predict_scalar(x), &eval_x)?;
    println!("prediction variance {:.4}", r.prediction_variance);
    for (i, v) in r.variance.iter().enumerate() {
        let share = r.shares.as_ref().map_or(f64::NAN, |s| s[i]);
        println!(
            "order {:>3}: variance {v:.4}, share {share:.3}",
            r.order_label(i)
        );
    }
    Ok(())
}
