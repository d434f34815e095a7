//! Central finite differences against the analytic gradient on randomized
//! small networks, with and without dropout masks and weight decay.

use intxlab::mlp::{
    flatten_gradients, Batch, BatchTargets, DropoutMode, DropoutSpec, LayerMasks, MlpConfig,
    MlpModel,
};
use intxlab::seed;
use rand::Rng;

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-5;

struct Case {
    model: MlpModel,
    xs: Vec<Vec<f64>>,
    values: Vec<f64>,
    classes: Vec<usize>,
    masks: Option<Vec<LayerMasks>>,
    weight_decay: f64,
}

fn case(i: u64) -> Case {
    let mut rng = seed::rng(seed::derive_named(i, "fd case"));
    let d = rng.gen_range(1..=4);
    let widths: Vec<usize> = (0..rng.gen_range(1..=2))
        .map(|_| rng.gen_range(1..=4))
        .collect();
    let classify = i % 3 == 2;
    let config = if classify {
        MlpConfig::classification(d, widths, rng.gen_range(2..=3))
    } else {
        MlpConfig::regression(d, widths)
    };
    let mut model = MlpModel::init(config.clone(), i).unwrap();
    let params: Vec<f64> = model
        .flat_params()
        .iter()
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    model.set_flat_params(&params).unwrap();
    let b = rng.gen_range(1..=4);
    let xs: Vec<Vec<f64>> = (0..b)
        .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let values = (0..b).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let classes = (0..b)
        .map(|_| rng.gen_range(0..config.output_dim))
        .collect();
    let masks = (i % 2 == 1).then(|| {
        let mode = if i % 4 == 1 {
            DropoutMode::Plain
        } else {
            DropoutMode::Inverted
        };
        let spec = DropoutSpec::both(0.3).with_mode(mode);
        (0..b)
            .map(|_| LayerMasks::sample(&spec, &config, &mut rng))
            .collect()
    });
    let weight_decay = [0.0, 0.01, 0.5][(i % 3) as usize];
    Case {
        model,
        xs,
        values,
        classes,
        masks,
        weight_decay,
    }
}

fn loss(c: &Case, model: &MlpModel) -> (f64, Vec<f64>) {
    let targets = if model.config.output_dim > 1 {
        BatchTargets::Classes(&c.classes)
    } else {
        BatchTargets::Values(&c.values)
    };
    let batch = Batch {
        inputs: c.xs.iter().map(Vec::as_slice).collect(),
        targets,
    };
    let (l, g) = model
        .loss_and_grad(&batch, c.masks.as_deref(), c.weight_decay)
        .unwrap();
    (l, flatten_gradients(&g))
}

pub struct FdSummary {
    pub cases: usize,
    pub masked: usize,
    pub decayed: usize,
    pub worst: f64,
    pub failures: Vec<String>,
}

pub fn suite(n: u64) -> FdSummary {
    let mut s = FdSummary {
        cases: 0,
        masked: 0,
        decayed: 0,
        worst: 0.0,
        failures: Vec::new(),
    };
    for i in 0..n {
        let c = case(i);
        s.cases += 1;
        s.masked += usize::from(c.masks.is_some());
        s.decayed += usize::from(c.weight_decay > 0.0);
        let (_, analytic) = loss(&c, &c.model);
        let params = c.model.flat_params();
        let mut probe = c.model.clone();
        for j in 0..params.len() {
            let mut p = params.clone();
            p[j] += STEP;
            probe.set_flat_params(&p).unwrap();
            let up = loss(&c, &probe).0;
            p[j] -= 2.0 * STEP;
            probe.set_flat_params(&p).unwrap();
            let down = loss(&c, &probe).0;
            let numeric = (up - down) / (2.0 * STEP);
            let scale = analytic[j].abs().max(numeric.abs()).max(1e-3);
            let rel = (analytic[j] - numeric).abs() / scale;
            s.worst = s.worst.max(rel);
            if rel >= TOLERANCE {
                s.failures.push(format!(
                    "case {i} coordinate {j}: analytic {} numeric {numeric} rel {rel:.2e}",
                    analytic[j]
                ));
            }
        }
    }
    s
}
