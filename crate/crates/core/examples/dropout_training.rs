//! Train the same network on pure noise with and without input dropout.
//!
//! `cargo run --example dropout_training`

use intxlab::datagen::gen_noise;
use intxlab::mlp::{mse, train, DropoutSpec, MlpConfig, MlpModel, TrainConfig};

fn main() -> intxlab::Result<()> {
    let data = gen_noise(1000, 10, 7)?;
    let heldout = gen_noise(300, 10, 8)?;
    for (label, dropout) in [
        ("no dropout", DropoutSpec::default()),
        ("input 0.3", DropoutSpec::input(0.3)),
        ("input and activation 0.3", DropoutSpec::both(0.3)),
    ] {
        let mut model = MlpModel::init(MlpConfig::regression(10, vec![32, 32]), 1)?;
        let cfg = TrainConfig {
            epochs: 150,
            patience: None,
            dropout,
            seed: 2,
            ..TrainConfig::default()
        };
        let trace = train(&mut model, &data, Some(&heldout), &cfg)?;
        println!(
            "{label}: train {:.4}, held-out {:.4}, best held-out epoch {}",
            mse(&model, &data)?,
            mse(&model, &heldout)?,
            trace
                .best_heldout_epoch()
                .map_or("none".into(), |e| e.to_string())
        );
    }
    Ok(())
}
