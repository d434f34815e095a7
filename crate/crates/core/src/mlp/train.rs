use std::io::Write;

use rand::seq::SliceRandom;

use super::{Batch, BatchTargets, LayerMasks, MlpModel, Task, TrainConfig, Workspace};
use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::seed;

/// Per-epoch losses plus model snapshots taken at the configured cadence.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    /// Mask-free data loss on the training set after each epoch.
    pub train_loss: Vec<f64>,
    /// Mask-free loss on the held-out set after each epoch (NaN without one).
    pub heldout_loss: Vec<f64>,
    pub snapshots: Vec<(usize, MlpModel)>,
    /// `(epoch, loss)` of the first non-finite loss.
    pub diverged: Option<(usize, f64)>,
    /// Epoch at which patience ran out, if it did.
    pub stopped_at: Option<usize>,
}

impl TrainTrace {
    pub fn epochs_run(&self) -> usize {
        self.train_loss.len()
    }

    /// Epoch (1-based) with the lowest held-out loss.
    pub fn best_heldout_epoch(&self) -> Option<usize> {
        self.heldout_loss
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i + 1)
    }

    /// CSV with header `epoch,train_loss,heldout_loss,snapshot`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "train_loss", "heldout_loss", "snapshot"])?;
        for (i, (tr, ho)) in self.train_loss.iter().zip(&self.heldout_loss).enumerate() {
            let epoch = i + 1;
            let snap = self.snapshots.iter().any(|(e, _)| *e == epoch);
            w.write_record([
                epoch.to_string(),
                crate::datagen::fmt_f64(*tr),
                crate::datagen::fmt_f64(*ho),
                u8::from(snap).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<trace csv>", e))?;
        Ok(())
    }
}

fn targets_for<'a>(ds: &'a Dataset, task: Task) -> Result<BatchTargets<'a>> {
    match (task, ds.targets(), ds.labels()) {
        (Task::Regression, Some(y), _) => Ok(BatchTargets::Values(y)),
        (Task::Classification, _, Some(c)) => Ok(BatchTargets::Classes(c)),
        _ => Err(Error::Config(format!(
            "dataset response does not match a {task:?} network"
        ))),
    }
}

/// Mean squared error (regression) or mean cross-entropy (classification)
/// of the mask-free network over `ds`.
pub fn mse(model: &MlpModel, ds: &Dataset) -> Result<f64> {
    let targets = targets_for(ds, model.config.task)?;
    let mut ws = Workspace::new(&model.config);
    let mut total = 0.0;
    for i in 0..ds.n() {
        let out = model.forward_ws(ds.row(i), &mut ws);
        total += match targets {
            BatchTargets::Values(y) => (out[0] - y[i]).powi(2),
            BatchTargets::Classes(c) => {
                let m = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = out.iter().map(|o| (o - m).exp()).sum();
                z.ln() + m - out[c[i]]
            }
        };
    }
    Ok(total / ds.n() as f64)
}

/// Fraction of rows whose argmax logit equals the label.
pub fn accuracy(model: &MlpModel, ds: &Dataset) -> Result<f64> {
    let labels = ds
        .labels()
        .ok_or_else(|| Error::Config("accuracy needs a classification dataset".into()))?;
    let mut ws = Workspace::new(&model.config);
    let hits = (0..ds.n())
        .filter(|&i| super::argmax(model.forward_ws(ds.row(i), &mut ws)) == labels[i])
        .count();
    Ok(hits as f64 / ds.n() as f64)
}

/// Minibatch SGD with fresh dropout masks per sample per step. The model is
/// trained in place; its final state is the last completed epoch's.
pub fn train(
    model: &mut MlpModel,
    data: &Dataset,
    heldout: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<TrainTrace> {
    cfg.validate(data.n())?;
    if data.d() != model.config.input_dim {
        return Err(Error::Dimension {
            expected: model.config.input_dim,
            got: data.d(),
            context: "training features",
        });
    }
    let targets = targets_for(data, model.config.task)?;
    if let Some(h) = heldout {
        targets_for(h, model.config.task)?;
    }
    let mut rng = seed::rng(cfg.seed);
    let mut order: Vec<usize> = (0..data.n()).collect();
    let mut grads = model.zero_gradients();
    let dropout = cfg.dropout;
    let mut masks: Vec<LayerMasks> = if dropout.is_active() {
        (0..cfg.batch_size)
            .map(|_| LayerMasks::none(&model.config))
            .collect()
    } else {
        Vec::new()
    };
    let mut batch_targets_v = Vec::with_capacity(cfg.batch_size);
    let mut batch_targets_c = Vec::with_capacity(cfg.batch_size);

    let mut trace = TrainTrace {
        train_loss: Vec::new(),
        heldout_loss: Vec::new(),
        snapshots: Vec::new(),
        diverged: None,
        stopped_at: None,
    };
    let mut best = f64::INFINITY;
    let mut since_best = 0usize;

    'epochs: for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let inputs: Vec<&[f64]> = chunk.iter().map(|&i| data.row(i)).collect();
            let bt = match targets {
                BatchTargets::Values(y) => {
                    batch_targets_v.clear();
                    batch_targets_v.extend(chunk.iter().map(|&i| y[i]));
                    BatchTargets::Values(&batch_targets_v)
                }
                BatchTargets::Classes(c) => {
                    batch_targets_c.clear();
                    batch_targets_c.extend(chunk.iter().map(|&i| c[i]));
                    BatchTargets::Classes(&batch_targets_c)
                }
            };
            let batch = Batch {
                inputs,
                targets: bt,
            };
            let mask_slice = if dropout.is_active() {
                for m in masks.iter_mut().take(chunk.len()) {
                    m.resample(&dropout, &model.config, &mut rng);
                }
                Some(&masks[..chunk.len()])
            } else {
                None
            };
            match model.accumulate(&batch, mask_slice, cfg.weight_decay, &mut grads, epoch) {
                Ok(_) => model.apply_update(&grads, cfg.learning_rate),
                Err(Error::Divergence { epoch, loss }) => {
                    trace.diverged = Some((epoch, loss));
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
        }
        let tr = mse(model, data)?;
        let ho = match heldout {
            Some(h) => mse(model, h)?,
            None => f64::NAN,
        };
        if !tr.is_finite() {
            trace.diverged = Some((epoch, tr));
            break;
        }
        trace.train_loss.push(tr);
        trace.heldout_loss.push(ho);
        if cfg.checkpoint_every.is_some_and(|c| epoch % c == 0) {
            trace.snapshots.push((epoch, model.clone()));
        }
        if let Some(patience) = cfg.patience {
            if ho.is_finite() {
                if ho < best {
                    best = ho;
                    since_best = 0;
                } else {
                    since_best += 1;
                    if since_best >= patience {
                        trace.stopped_at = Some(epoch);
                        break;
                    }
                }
            }
        }
    }
    Ok(trace)
}
