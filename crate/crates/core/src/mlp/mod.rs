//! Fully connected ReLU networks with hand-written backpropagation.
//!
//! Dropout is expressed through [`LayerMasks`]: one optional multiplier
//! vector for the input and one per hidden layer. Multipliers are binary in
//! plain mode and `{0, 1/(1-p)}` in inverted mode. Masks are constants for
//! differentiation.

mod io;
mod train;

pub use io::{read_model, write_model};
pub use train::{accuracy, mse, train, TrainTrace};

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut2};
use rand::Rng;

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::seed::{self, LabRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    /// Squared loss on a single output.
    Regression,
    /// Softmax cross-entropy over `output_dim` classes.
    Classification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
    pub task: Task,
}

impl MlpConfig {
    pub fn regression(input_dim: usize, hidden_widths: Vec<usize>) -> Self {
        MlpConfig {
            input_dim,
            hidden_widths,
            output_dim: 1,
            activation: Activation::Relu,
            task: Task::Regression,
        }
    }

    pub fn classification(input_dim: usize, hidden_widths: Vec<usize>, classes: usize) -> Self {
        MlpConfig {
            input_dim,
            hidden_widths,
            output_dim: classes,
            activation: Activation::Relu,
            task: Task::Classification,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_widths.is_empty() {
            return Err(Error::Config(
                "network needs at least one hidden layer".into(),
            ));
        }
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_widths.contains(&0) {
            return Err(Error::Config("all layer widths must be >= 1".into()));
        }
        if self.task == Task::Regression && self.output_dim != 1 {
            return Err(Error::Config(
                "regression networks have a single output".into(),
            ));
        }
        Ok(())
    }

    /// Widths of every layer boundary, input first.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_widths.len() + 2);
        dims.push(self.input_dim);
        dims.extend(&self.hidden_widths);
        dims.push(self.output_dim);
        dims
    }

    pub fn parameter_count(&self) -> usize {
        self.dims().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutMode {
    /// Multiply by the binary mask.
    Plain,
    /// Divide kept units by `1 - p`.
    Inverted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutSpec {
    pub input_rate: f64,
    pub activation_rate: f64,
    pub mode: DropoutMode,
}

impl Default for DropoutSpec {
    fn default() -> Self {
        DropoutSpec {
            input_rate: 0.0,
            activation_rate: 0.0,
            mode: DropoutMode::Plain,
        }
    }
}

impl DropoutSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn input(rate: f64) -> Self {
        DropoutSpec {
            input_rate: rate,
            ..Self::default()
        }
    }

    pub fn activation(rate: f64) -> Self {
        DropoutSpec {
            activation_rate: rate,
            ..Self::default()
        }
    }

    pub fn both(rate: f64) -> Self {
        DropoutSpec {
            input_rate: rate,
            activation_rate: rate,
            ..Self::default()
        }
    }

    pub fn with_mode(self, mode: DropoutMode) -> Self {
        DropoutSpec { mode, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("input", self.input_rate),
            ("activation", self.activation_rate),
        ] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::Config(format!(
                    "{name} dropout rate must lie in [0, 1), got {p}"
                )));
            }
        }
        Ok(())
    }

    pub fn is_active(&self) -> bool {
        self.input_rate > 0.0 || self.activation_rate > 0.0
    }

    fn scale(&self, p: f64) -> f64 {
        match self.mode {
            DropoutMode::Plain => 1.0,
            DropoutMode::Inverted => 1.0 / (1.0 - p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub dropout: DropoutSpec,
    pub seed: u64,
    /// Snapshot cadence in epochs; `None` keeps no snapshots.
    pub checkpoint_every: Option<usize>,
    /// Stop once held-out loss has not improved for this many epochs.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.03,
            epochs: 2000,
            batch_size: 32,
            weight_decay: 0.0,
            dropout: DropoutSpec::default(),
            seed: 0,
            checkpoint_every: None,
            patience: Some(200),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, train_rows: usize) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be > 0".into()));
        }
        if self.batch_size == 0 || self.batch_size > train_rows {
            return Err(Error::Config(format!(
                "batch size {} must lie in 1..={train_rows}",
                self.batch_size
            )));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config("weight decay must be >= 0".into()));
        }
        if self.checkpoint_every == Some(0) {
            return Err(Error::Config("checkpoint cadence must be >= 1".into()));
        }
        self.dropout.validate()
    }
}

/// Dense layer; `weights` is `outputs x inputs`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn row(&self, o: usize) -> &[f64] {
        &self.weights[o * self.inputs..(o + 1) * self.inputs]
    }

    fn view(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.outputs, self.inputs), &self.weights).expect("layer shape")
    }

    fn forward_into(&self, input: &[f64], out: &mut [f64]) {
        for (o, slot) in out.iter_mut().enumerate() {
            *slot = dot(self.row(o), input) + self.bias[o];
        }
    }
}

/// Gradient container with the same shapes as the model.
pub type Gradients = Vec<Layer>;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub config: MlpConfig,
    pub layers: Vec<Layer>,
}

impl MlpModel {
    /// Weights ~ Unif(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
    pub fn init(config: MlpConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::rng(seed);
        let layers = config
            .dims()
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let mut layer = Layer::zeros(fan_in, fan_out);
                for v in &mut layer.weights {
                    *v = rng.gen_range(-bound..bound);
                }
                layer
            })
            .collect();
        Ok(MlpModel { config, layers })
    }

    pub fn from_layers(config: MlpConfig, layers: Vec<Layer>) -> Result<Self> {
        config.validate()?;
        let dims = config.dims();
        if layers.len() != dims.len() - 1 {
            return Err(Error::Dimension {
                expected: dims.len() - 1,
                got: layers.len(),
                context: "layer count",
            });
        }
        for (l, layer) in layers.iter().enumerate() {
            if layer.inputs != dims[l] || layer.outputs != dims[l + 1] {
                return Err(Error::Dimension {
                    expected: dims[l] * dims[l + 1],
                    got: layer.inputs * layer.outputs,
                    context: "layer shape",
                });
            }
            if layer.weights.len() != layer.inputs * layer.outputs
                || layer.bias.len() != layer.outputs
            {
                return Err(Error::Dimension {
                    expected: layer.inputs * layer.outputs,
                    got: layer.weights.len(),
                    context: "layer storage",
                });
            }
        }
        Ok(MlpModel { config, layers })
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn zero_gradients(&self) -> Gradients {
        self.layers
            .iter()
            .map(|l| Layer::zeros(l.inputs, l.outputs))
            .collect()
    }

    /// Forward pass. With `masks`, inputs and hidden activations are
    /// multiplied by their mask multipliers before feeding the next layer.
    pub fn predict(&self, x: &[f64], masks: Option<&LayerMasks>) -> Result<Vec<f64>> {
        if x.len() != self.config.input_dim {
            return Err(Error::Dimension {
                expected: self.config.input_dim,
                got: x.len(),
                context: "input vector",
            });
        }
        if let Some(m) = masks {
            m.check(&self.config)?;
        }
        let mut cur = x.to_vec();
        if let Some(mask) = masks.and_then(|m| m.input.as_deref()) {
            apply_mask(&mut cur, mask);
        }
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut next = vec![0.0; layer.outputs];
            layer.forward_into(&cur, &mut next);
            if l < last {
                next.iter_mut().for_each(relu);
                if let Some(mask) = masks.and_then(|m| m.hidden[l].as_deref()) {
                    apply_mask(&mut next, mask);
                }
            }
            cur = next;
        }
        Ok(cur)
    }

    /// Scalar output of a regression network, for use as a teacher.
    pub fn predict_scalar(&self, x: &[f64]) -> f64 {
        let mut ws = Workspace::new(&self.config);
        self.forward_cached(x, None, &mut ws);
        ws.outputs()[0]
    }

    /// Index of the largest logit.
    pub fn predict_class(&self, x: &[f64]) -> usize {
        let mut ws = Workspace::new(&self.config);
        self.forward_cached(x, None, &mut ws);
        argmax(ws.outputs())
    }

    fn forward_cached(&self, x: &[f64], masks: Option<&LayerMasks>, ws: &mut Workspace) {
        let acts = &mut ws.acts;
        acts[0].copy_from_slice(x);
        if let Some(mask) = masks.and_then(|m| m.input.as_deref()) {
            apply_mask(&mut acts[0], mask);
        }
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (prev, rest) = acts.split_at_mut(l + 1);
            let out = &mut rest[0];
            layer.forward_into(&prev[l], out);
            if l < last {
                ws.pre[l].copy_from_slice(out);
                out.iter_mut().for_each(relu);
                if let Some(mask) = masks.and_then(|m| m.hidden[l].as_deref()) {
                    apply_mask(out, mask);
                }
            }
        }
    }

    /// Mean loss over the batch plus `(lambda/2) * sum(weights^2)` (biases are
    /// not decayed), with gradients by reverse-mode differentiation.
    pub fn loss_and_grad(
        &self,
        batch: &Batch<'_>,
        masks: Option<&[LayerMasks]>,
        weight_decay: f64,
    ) -> Result<(f64, Gradients)> {
        let mut grads = self.zero_gradients();
        let loss = self.accumulate(batch, masks, weight_decay, &mut grads, 0)?;
        Ok((loss, grads))
    }

    pub(crate) fn accumulate(
        &self,
        batch: &Batch<'_>,
        masks: Option<&[LayerMasks]>,
        weight_decay: f64,
        grads: &mut Gradients,
        epoch: usize,
    ) -> Result<f64> {
        let b = batch.len();
        if b == 0 {
            return Err(Error::Config("empty batch".into()));
        }
        if let Some(m) = masks {
            if m.len() != b {
                return Err(Error::Dimension {
                    expected: b,
                    got: m.len(),
                    context: "per-sample masks",
                });
            }
            for mask in m {
                mask.check(&self.config)?;
            }
        }
        let input_dim = self.config.input_dim;
        let mut x0 = Array2::zeros((b, input_dim));
        for (i, x) in batch.inputs.iter().enumerate() {
            if x.len() != input_dim {
                return Err(Error::Dimension {
                    expected: input_dim,
                    got: x.len(),
                    context: "batch row",
                });
            }
            let row = x0.row_mut(i).into_slice().expect("standard layout");
            row.copy_from_slice(x);
            if let Some(mask) = masks.and_then(|m| m[i].input.as_deref()) {
                apply_mask(row, mask);
            }
        }

        // Whole-batch forward pass; `gates` holds relu'(z) * mask per hidden layer.
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut gates: Vec<Array2<f64>> = Vec::with_capacity(last);
        acts.push(x0);
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = Array2::zeros((b, layer.outputs));
            for mut row in z.rows_mut() {
                row.assign(&ArrayView1::from(&layer.bias));
            }
            general_mat_mul(1.0, &acts[l], &layer.view().t(), 1.0, &mut z);
            if l < last {
                let mut gate = z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
                z.iter_mut().for_each(relu);
                if let Some(m) = masks {
                    for i in 0..b {
                        if let Some(mask) = m[i].hidden[l].as_deref() {
                            apply_mask(z.row_mut(i).into_slice().expect("standard layout"), mask);
                            apply_mask(
                                gate.row_mut(i).into_slice().expect("standard layout"),
                                mask,
                            );
                        }
                    }
                }
                gates.push(gate);
            }
            acts.push(z);
        }

        // d(loss)/d(output pre-activation), already divided by batch size
        let inv_b = 1.0 / b as f64;
        let mut data_loss = 0.0;
        let mut delta = acts[last + 1].clone();
        for (i, mut d) in delta.rows_mut().into_iter().enumerate() {
            let d = d.as_slice_mut().expect("standard layout");
            match batch.targets {
                BatchTargets::Values(y) => {
                    let r = d[0] - y[i];
                    data_loss += r * r;
                    d[0] = 2.0 * r * inv_b;
                }
                BatchTargets::Classes(c) => {
                    let m = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let target = d[c[i]];
                    let mut z = 0.0;
                    for v in d.iter_mut() {
                        *v = (*v - m).exp();
                        z += *v;
                    }
                    data_loss += z.ln() + m - target;
                    for v in d.iter_mut() {
                        *v *= inv_b / z;
                    }
                    d[c[i]] -= inv_b;
                }
            }
        }

        for l in (0..=last).rev() {
            let layer = &self.layers[l];
            let g = &mut grads[l];
            let mut gw = ArrayViewMut2::from_shape((layer.outputs, layer.inputs), &mut g.weights)
                .expect("layer shape");
            general_mat_mul(1.0, &delta.t(), &acts[l], 0.0, &mut gw);
            for (gb, col) in g.bias.iter_mut().zip(delta.columns()) {
                *gb = col.sum();
            }
            if l == 0 {
                break;
            }
            let mut da = delta.dot(&layer.view());
            da *= &gates[l - 1];
            delta = da;
        }
        let mut loss = data_loss * inv_b;
        if weight_decay > 0.0 {
            let mut sq = 0.0;
            for (layer, g) in self.layers.iter().zip(grads.iter_mut()) {
                sq += dot(&layer.weights, &layer.weights);
                axpy(weight_decay, &layer.weights, &mut g.weights);
            }
            loss += 0.5 * weight_decay * sq;
        }
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        Ok(loss)
    }

    /// `params -= lr * grads`.
    pub fn apply_update(&mut self, grads: &Gradients, lr: f64) {
        for (layer, g) in self.layers.iter_mut().zip(grads) {
            axpy(-lr, &g.weights, &mut layer.weights);
            axpy(-lr, &g.bias, &mut layer.bias);
        }
    }

    /// All parameters flattened layer by layer (weights then bias).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            v.extend(&l.weights);
            v.extend(&l.bias);
        }
        v
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::Dimension {
                expected: self.parameter_count(),
                got: params.len(),
                context: "flat parameters",
            });
        }
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[at..at + nw]);
            at += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
        Ok(())
    }
}

pub fn flatten_gradients(g: &Gradients) -> Vec<f64> {
    let mut v = Vec::new();
    for l in g {
        v.extend(&l.weights);
        v.extend(&l.bias);
    }
    v
}

/// Rows and targets of one minibatch.
#[derive(Debug, Clone)]
pub struct Batch<'a> {
    pub inputs: Vec<&'a [f64]>,
    pub targets: BatchTargets<'a>,
}

#[derive(Debug, Clone, Copy)]
pub enum BatchTargets<'a> {
    Values(&'a [f64]),
    Classes(&'a [usize]),
}

impl<'a> Batch<'a> {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Whole dataset as one batch.
    pub fn from_dataset(ds: &'a Dataset) -> Self {
        let inputs = (0..ds.n()).map(|i| ds.row(i)).collect();
        let targets = match (ds.targets(), ds.labels()) {
            (Some(y), _) => BatchTargets::Values(y),
            (None, Some(c)) => BatchTargets::Classes(c),
            (None, None) => unreachable!("dataset has a response"),
        };
        Batch { inputs, targets }
    }
}

/// Per-sample dropout multipliers: index 0 is the input, `hidden[l]` follows
/// hidden layer `l`'s nonlinearity.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerMasks {
    pub input: Option<Vec<f64>>,
    pub hidden: Vec<Option<Vec<f64>>>,
}

impl LayerMasks {
    pub fn none(config: &MlpConfig) -> Self {
        LayerMasks {
            input: None,
            hidden: vec![None; config.hidden_widths.len()],
        }
    }

    pub fn ones(config: &MlpConfig) -> Self {
        LayerMasks {
            input: Some(vec![1.0; config.input_dim]),
            hidden: config
                .hidden_widths
                .iter()
                .map(|&w| Some(vec![1.0; w]))
                .collect(),
        }
    }

    /// Fresh masks for one sample according to `spec`.
    pub fn sample(spec: &DropoutSpec, config: &MlpConfig, rng: &mut LabRng) -> Self {
        let mut masks = LayerMasks::none(config);
        masks.resample(spec, config, rng);
        masks
    }

    /// Redraw in place, reusing allocations.
    pub(crate) fn resample(&mut self, spec: &DropoutSpec, config: &MlpConfig, rng: &mut LabRng) {
        if spec.input_rate > 0.0 {
            let v = self.input.get_or_insert_with(Vec::new);
            fill_mask(
                v,
                config.input_dim,
                spec.input_rate,
                spec.scale(spec.input_rate),
                rng,
            );
        }
        if spec.activation_rate > 0.0 {
            for (h, &w) in self.hidden.iter_mut().zip(&config.hidden_widths) {
                let v = h.get_or_insert_with(Vec::new);
                fill_mask(
                    v,
                    w,
                    spec.activation_rate,
                    spec.scale(spec.activation_rate),
                    rng,
                );
            }
        }
    }

    fn check(&self, config: &MlpConfig) -> Result<()> {
        if let Some(m) = &self.input {
            if m.len() != config.input_dim {
                return Err(Error::Dimension {
                    expected: config.input_dim,
                    got: m.len(),
                    context: "input mask",
                });
            }
        }
        if self.hidden.len() != config.hidden_widths.len() {
            return Err(Error::Dimension {
                expected: config.hidden_widths.len(),
                got: self.hidden.len(),
                context: "hidden mask count",
            });
        }
        for (m, &w) in self.hidden.iter().zip(&config.hidden_widths) {
            if let Some(m) = m {
                if m.len() != w {
                    return Err(Error::Dimension {
                        expected: w,
                        got: m.len(),
                        context: "hidden mask",
                    });
                }
            }
        }
        Ok(())
    }
}

/// Binary mask: each entry 1 with probability `1 - p`, else 0.
pub fn sample_mask(p: f64, dim: usize, rng: &mut LabRng) -> Vec<f64> {
    let mut v = Vec::with_capacity(dim);
    fill_mask(&mut v, dim, p, 1.0, rng);
    v
}

fn fill_mask(v: &mut Vec<f64>, dim: usize, p: f64, keep_value: f64, rng: &mut LabRng) {
    v.clear();
    v.extend((0..dim).map(|_| {
        if rng.gen::<f64>() < p {
            0.0
        } else {
            keep_value
        }
    }));
}

/// Preallocated forward/backward buffers.
pub(crate) struct Workspace {
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl Workspace {
    pub(crate) fn new(config: &MlpConfig) -> Self {
        let dims = config.dims();
        Workspace {
            acts: dims.iter().map(|&d| vec![0.0; d]).collect(),
            pre: config.hidden_widths.iter().map(|&d| vec![0.0; d]).collect(),
        }
    }

    pub(crate) fn outputs(&self) -> &[f64] {
        self.acts.last().expect("output layer")
    }
}

impl MlpModel {
    pub(crate) fn forward_ws<'w>(&self, x: &[f64], ws: &'w mut Workspace) -> &'w [f64] {
        self.forward_cached(x, None, ws);
        ws.outputs()
    }
}

fn apply_mask(v: &mut [f64], mask: &[f64]) {
    for (a, m) in v.iter_mut().zip(mask) {
        *a *= m;
    }
}

fn relu(v: &mut f64) {
    if *v < 0.0 {
        *v = 0.0;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators so the loop vectorizes
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn net(input: usize, hidden: Vec<usize>) -> MlpModel {
        MlpModel::init(MlpConfig::regression(input, hidden), 0).unwrap()
    }

    #[test]
    fn parameter_counts() {
        let m = net(25, vec![32, 32, 32]);
        // independent count: 25*32+32, 2*(32*32+32), 32+1
        let expected = (25 * 32 + 32) + 2 * (32 * 32 + 32) + (32 + 1);
        assert_eq!(expected, 2977);
        assert_eq!(m.parameter_count(), 2977);
        assert_eq!(m.config.parameter_count(), 2977);
        assert_eq!(net(1, vec![1]).parameter_count(), 4);
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = net(25, vec![32, 32, 32]);
        let b = net(25, vec![32, 32, 32]);
        assert_eq!(a, b);
        for l in &a.layers {
            let bound = 1.0 / (l.inputs as f64).sqrt();
            assert!(l.weights.iter().all(|w| w.abs() <= bound));
            assert!(l.bias.iter().all(|&b| b == 0.0));
        }
        let c = MlpModel::init(MlpConfig::regression(25, vec![32, 32, 32]), 1).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_configs() {
        assert!(MlpModel::init(MlpConfig::regression(3, vec![]), 0).is_err());
        assert!(MlpModel::init(MlpConfig::regression(0, vec![2]), 0).is_err());
        assert!(MlpModel::init(MlpConfig::regression(3, vec![4, 0]), 0).is_err());
    }

    #[test]
    fn mask_sampling() {
        let mut rng = seed::rng(1);
        assert!(sample_mask(0.0, 100, &mut rng).iter().all(|&m| m == 1.0));
        let m = sample_mask(0.5, 10_000, &mut rng);
        let frac = m.iter().sum::<f64>() / 10_000.0;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
        let m = sample_mask(0.9, 10, &mut rng);
        assert!(m.iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn identity_masks_are_bit_exact() {
        let m = net(5, vec![7, 6]);
        let x = [0.3, -0.2, 0.9, -1.0, 0.05];
        let plain = m.predict(&x, None).unwrap();
        let ones = m.predict(&x, Some(&LayerMasks::ones(&m.config))).unwrap();
        assert_eq!(plain, ones);
        assert_eq!(plain[0], m.predict_scalar(&x));
    }

    #[test]
    fn zero_input_mask_gives_origin_value() {
        let m = net(4, vec![5, 5]);
        let mut masks = LayerMasks::none(&m.config);
        masks.input = Some(vec![0.0; 4]);
        let masked = m.predict(&[0.7, -0.3, 0.1, 0.9], Some(&masks)).unwrap();
        let origin = m.predict(&[0.0; 4], None).unwrap();
        assert_eq!(masked, origin);
    }

    #[test]
    fn hand_set_single_hidden_unit() {
        // y = w2 * relu(w1 * x + b1) + b2
        let cfg = MlpConfig::regression(1, vec![1]);
        let layers = vec![
            Layer {
                inputs: 1,
                outputs: 1,
                weights: vec![2.0],
                bias: vec![-0.5],
            },
            Layer {
                inputs: 1,
                outputs: 1,
                weights: vec![-3.0],
                bias: vec![0.25],
            },
        ];
        let m = MlpModel::from_layers(cfg, layers).unwrap();
        // relu(2*1 - 0.5) = 1.5; -3 * 1.5 + 0.25 = -4.25
        assert_eq!(m.predict(&[1.0], None).unwrap(), vec![-4.25]);
        // relu(2*0 - 0.5) = 0 -> 0.25
        assert_eq!(m.predict(&[0.0], None).unwrap(), vec![0.25]);
    }

    #[test]
    fn dimension_errors() {
        let m = net(3, vec![4]);
        assert!(matches!(
            m.predict(&[1.0, 2.0], None),
            Err(Error::Dimension { .. })
        ));
        let mut masks = LayerMasks::none(&m.config);
        masks.input = Some(vec![1.0; 2]);
        assert!(matches!(
            m.predict(&[1.0, 2.0, 3.0], Some(&masks)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn zero_data_loss_gives_zero_data_gradient() {
        let m = net(3, vec![4, 4]);
        let xs: Vec<Vec<f64>> = vec![vec![0.1, 0.2, 0.3], vec![-0.5, 0.4, 0.0]];
        let ys: Vec<f64> = xs.iter().map(|x| m.predict_scalar(x)).collect();
        let batch = Batch {
            inputs: xs.iter().map(|v| v.as_slice()).collect(),
            targets: BatchTargets::Values(&ys),
        };
        let (loss, g) = m.loss_and_grad(&batch, None, 0.0).unwrap();
        // batched gemm sums in a different order than predict, so only rounding remains
        assert!(loss < 1e-28);
        assert!(flatten_gradients(&g).iter().all(|&v| v.abs() < 1e-14));

        // decay only: gradient equals the weights, bias gradient zero
        let (_, g) = m.loss_and_grad(&batch, None, 1.0).unwrap();
        for (gl, l) in g.iter().zip(&m.layers) {
            for (a, b) in gl.weights.iter().zip(&l.weights) {
                assert!((a - b).abs() < 1e-14);
            }
            assert!(gl.bias.iter().all(|&b| b.abs() < 1e-14));
        }
    }

    #[test]
    fn empty_batch_rejected() {
        let m = net(2, vec![2]);
        let batch = Batch {
            inputs: vec![],
            targets: BatchTargets::Values(&[]),
        };
        assert!(m.loss_and_grad(&batch, None, 0.0).is_err());
    }

    #[test]
    fn classification_gradient_sums_to_zero_over_logits() {
        let m = MlpModel::init(MlpConfig::classification(3, vec![5], 4), 2).unwrap();
        let x = [0.4, -0.1, 0.8];
        let batch = Batch {
            inputs: vec![&x],
            targets: BatchTargets::Classes(&[2]),
        };
        let (loss, g) = m.loss_and_grad(&batch, None, 0.0).unwrap();
        assert!(loss > 0.0);
        let s: f64 = g[1].bias.iter().sum();
        assert_relative_eq!(s, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn inverted_masks_scale_kept_units() {
        let cfg = MlpConfig::regression(1000, vec![2]);
        let spec = DropoutSpec::input(0.25).with_mode(DropoutMode::Inverted);
        let mut rng = seed::rng(3);
        let masks = LayerMasks::sample(&spec, &cfg, &mut rng);
        let input = masks.input.unwrap();
        assert_eq!(input.len(), 1000);
        assert!(input
            .iter()
            .all(|&v| v == 0.0 || (v - 1.0 / 0.75).abs() < 1e-15));
        assert!(masks.hidden.iter().all(Option::is_none));
    }
}
