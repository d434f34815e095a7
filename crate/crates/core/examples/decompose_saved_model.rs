//! Save a small network, load it back and decompose it exactly on a grid.
//!
//! `cargo run --example decompose_saved_model`

use std::io::Cursor;
use std::sync::Arc;

use intxlab::anova::{decompose, report, tabulate, WeightedGrid};
use intxlab::datagen::{gen_signal, GeneratorKind};
use intxlab::mlp::{read_model, train, write_model, MlpConfig, MlpModel, TrainConfig};

fn main() -> intxlab::Result<()> {
    let full = gen_signal(GeneratorKind::PairEffects, 800, 0.05, 1)?;
    // keep the first two inputs so the grid stays small
    let x = full.features().slice(ndarray::s![.., ..2]).to_owned();
    let y: Vec<f64> = x.rows().into_iter().map(|r| r[0] * r[1]).collect();
    let data = intxlab::datagen::Dataset::new(
        x,
        intxlab::datagen::Response::Regression(y),
        intxlab::datagen::DensitySpec::ProductUniform {
            lo: -1.0,
            hi: 1.0,
            d: 2,
        },
    )?;
    let mut model = MlpModel::init(MlpConfig::regression(2, vec![16, 16]), 2)?;
    let cfg = TrainConfig {
        epochs: 200,
        patience: None,
        ..TrainConfig::default()
    };
    train(&mut model, &data, None, &cfg)?;

    let mut text = Vec::new();
    write_model(&model, &mut text)?;
    let loaded = read_model(Cursor::new(text))?;
    let grid = Arc::new(WeightedGrid::parse_spec("uniform:-1:1:41", 2)?);
    let r = report(&decompose(&tabulate(|x| loaded.predict_scalar(x), grid)?)?);
    for (u, v) in &r.variance_by_subset {
        println!("{{{u}}}: {v:.5}");
    }
    Ok(())
}
