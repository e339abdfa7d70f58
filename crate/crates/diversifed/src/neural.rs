//! Minimal dense-network training core: MLP forward/backward, softmax
//! cross-entropy, and Adam. No external ML framework; parameters live in
//! the flat canonical layout so models move through the protocol as plain
//! vectors.

use crate::error::{Error, Result};
use crate::param::ParamVector;
use crate::rng::stream;
use rand::Rng;

/// Architecture of a dense network: ReLU on hidden layers, identity output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    layer_sizes: Vec<usize>,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "mlp needs at least 2 layer sizes, got {}",
                layer_sizes.len()
            )));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidConfig(
                "mlp layer sizes must be positive".into(),
            ));
        }
        Ok(MlpSpec { layer_sizes })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// `(out_dim, in_dim)` per layer, in flatten order.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        self.layer_sizes
            .windows(2)
            .map(|w| (w[1], w[0]))
            .collect()
    }

    /// Total flattened parameter count.
    pub fn param_dim(&self) -> usize {
        self.layer_shapes().iter().map(|&(o, i)| o * i + o).sum()
    }
}

/// A labeled minibatch: `rows x cols` inputs stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    inputs: Vec<f64>,
    rows: usize,
    cols: usize,
    labels: Vec<usize>,
}

impl Batch {
    pub fn new(inputs: Vec<f64>, cols: usize, labels: Vec<usize>) -> Result<Self> {
        if cols == 0 || inputs.len() % cols != 0 {
            return Err(Error::InvalidConfig(format!(
                "batch inputs of len {} not divisible into rows of {cols}",
                inputs.len()
            )));
        }
        let rows = inputs.len() / cols;
        if rows != labels.len() {
            return Err(Error::DimMismatch {
                expected: rows,
                actual: labels.len(),
                context: "batch labels",
            });
        }
        Ok(Batch {
            inputs,
            rows,
            cols,
            labels,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.inputs[r * self.cols..(r + 1) * self.cols]
    }

    /// New batch holding the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Batch {
        let mut inputs = Vec::with_capacity(rows.len() * self.cols);
        let mut labels = Vec::with_capacity(rows.len());
        for &r in rows {
            inputs.extend_from_slice(self.row(r));
            labels.push(self.labels[r]);
        }
        Batch {
            inputs,
            rows: rows.len(),
            cols: self.cols,
            labels,
        }
    }
}

/// Adam optimizer state for one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(dim: usize, lr: f64) -> Self {
        AdamState {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// Clear moments and the step counter, keeping hyperparameters.
    pub fn reset(&mut self) {
        self.m.iter_mut().for_each(|x| *x = 0.0);
        self.v.iter_mut().for_each(|x| *x = 0.0);
        self.step = 0;
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// Deterministic fan-based uniform init: weights from `U(-s, s)` with
/// `s = sqrt(6 / (fan_in + fan_out))`, biases zero.
pub fn init_params(spec: &MlpSpec, seed: u64) -> ParamVector {
    let mut rng = stream(seed, &[]);
    let mut values = Vec::with_capacity(spec.param_dim());
    for (out_dim, in_dim) in spec.layer_shapes() {
        let s = (6.0 / (in_dim + out_dim) as f64).sqrt();
        values.extend((0..out_dim * in_dim).map(|_| rng.random_range(-s..s)));
        values.extend(std::iter::repeat(0.0).take(out_dim));
    }
    ParamVector::new(values)
}

fn check_shapes(params: &ParamVector, spec: &MlpSpec, batch: &Batch) -> Result<()> {
    if params.dim() != spec.param_dim() {
        return Err(Error::DimMismatch {
            expected: spec.param_dim(),
            actual: params.dim(),
            context: "params vs mlp spec",
        });
    }
    if batch.cols() != spec.input_dim() {
        return Err(Error::DimMismatch {
            expected: spec.input_dim(),
            actual: batch.cols(),
            context: "batch width vs mlp input",
        });
    }
    if batch.labels().iter().any(|&l| l >= spec.num_classes()) {
        return Err(Error::InvalidConfig(format!(
            "label out of range for {} classes",
            spec.num_classes()
        )));
    }
    Ok(())
}

/// Per-layer views into a flat parameter vector.
struct LayerView<'a> {
    out_dim: usize,
    in_dim: usize,
    weights: &'a [f64],
    bias: &'a [f64],
}

fn layer_views<'a>(params: &'a ParamVector, spec: &MlpSpec) -> Vec<LayerView<'a>> {
    let mut views = Vec::new();
    let mut offset = 0;
    for (out_dim, in_dim) in spec.layer_shapes() {
        let weights = &params.values()[offset..offset + out_dim * in_dim];
        offset += out_dim * in_dim;
        let bias = &params.values()[offset..offset + out_dim];
        offset += out_dim;
        views.push(LayerView {
            out_dim,
            in_dim,
            weights,
            bias,
        });
    }
    views
}

/// Forward pass keeping every layer's activations for backprop.
/// `activations[0]` is the input; the last entry holds the logits.
fn forward_all(params: &ParamVector, spec: &MlpSpec, batch: &Batch) -> Vec<Vec<f64>> {
    let views = layer_views(params, spec);
    let rows = batch.rows();
    let mut activations: Vec<Vec<f64>> = Vec::with_capacity(views.len() + 1);
    activations.push(batch_inputs(batch));
    let n_layers = views.len();
    for (idx, layer) in views.iter().enumerate() {
        let prev = activations.last().unwrap();
        let mut out = vec![0.0; rows * layer.out_dim];
        for r in 0..rows {
            let x = &prev[r * layer.in_dim..(r + 1) * layer.in_dim];
            let y = &mut out[r * layer.out_dim..(r + 1) * layer.out_dim];
            for (o, yo) in y.iter_mut().enumerate() {
                let w = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                let mut acc = layer.bias[o];
                for (wi, xi) in w.iter().zip(x) {
                    acc += wi * xi;
                }
                *yo = acc;
            }
        }
        if idx + 1 < n_layers {
            out.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        activations.push(out);
    }
    activations
}

fn batch_inputs(batch: &Batch) -> Vec<f64> {
    let mut v = Vec::with_capacity(batch.rows() * batch.cols());
    for r in 0..batch.rows() {
        v.extend_from_slice(batch.row(r));
    }
    v
}

/// Logits for a batch, shape `rows x num_classes` row-major.
pub fn forward(params: &ParamVector, spec: &MlpSpec, batch: &Batch) -> Result<Vec<f64>> {
    check_shapes(params, spec, batch)?;
    Ok(forward_all(params, spec, batch).pop().unwrap())
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Mean softmax cross-entropy over a batch (forward only).
pub fn cross_entropy_loss(params: &ParamVector, spec: &MlpSpec, batch: &Batch) -> Result<f64> {
    if batch.rows() == 0 {
        return Err(Error::InvalidConfig("empty batch".into()));
    }
    let logits = forward(params, spec, batch)?;
    let c = spec.num_classes();
    let mut total = 0.0;
    for (r, &label) in batch.labels().iter().enumerate() {
        let row = &logits[r * c..(r + 1) * c];
        total += log_sum_exp(row) - row[label];
    }
    Ok(total / batch.rows() as f64)
}

/// Mean softmax cross-entropy and its gradient with respect to the flat
/// parameter vector.
pub fn cross_entropy_loss_and_grad(
    params: &ParamVector,
    spec: &MlpSpec,
    batch: &Batch,
) -> Result<(f64, ParamVector)> {
    if batch.rows() == 0 {
        return Err(Error::InvalidConfig("empty batch".into()));
    }
    check_shapes(params, spec, batch)?;
    let views = layer_views(params, spec);
    let rows = batch.rows();
    let c = spec.num_classes();
    let activations = forward_all(params, spec, batch);
    let logits = activations.last().unwrap();

    // Loss and dL/dlogits = (softmax - onehot) / rows in one pass.
    let mut total_loss = 0.0;
    let mut delta = vec![0.0; rows * c];
    for (r, &label) in batch.labels().iter().enumerate() {
        let row = &logits[r * c..(r + 1) * c];
        let lse = log_sum_exp(row);
        total_loss += lse - row[label];
        let d = &mut delta[r * c..(r + 1) * c];
        for (k, dk) in d.iter_mut().enumerate() {
            *dk = (row[k] - lse).exp() / rows as f64;
        }
        d[label] -= 1.0 / rows as f64;
    }
    let loss = total_loss / rows as f64;

    // Backward through the layers, writing into the flat gradient.
    let mut grad = vec![0.0; params.dim()];
    let mut layer_offsets = Vec::with_capacity(views.len());
    {
        let mut offset = 0;
        for layer in &views {
            layer_offsets.push(offset);
            offset += layer.out_dim * layer.in_dim + layer.out_dim;
        }
    }
    for (l, layer) in views.iter().enumerate().rev() {
        let prev = &activations[l];
        let offset = layer_offsets[l];
        let (w_grad, b_grad) =
            grad[offset..offset + layer.out_dim * layer.in_dim + layer.out_dim]
                .split_at_mut(layer.out_dim * layer.in_dim);
        for r in 0..rows {
            let d = &delta[r * layer.out_dim..(r + 1) * layer.out_dim];
            let x = &prev[r * layer.in_dim..(r + 1) * layer.in_dim];
            for (o, &del) in d.iter().enumerate() {
                if del == 0.0 {
                    continue;
                }
                let wg = &mut w_grad[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (g, xi) in wg.iter_mut().zip(x) {
                    *g += del * xi;
                }
                b_grad[o] += del;
            }
        }
        if l > 0 {
            // Propagate to the previous layer's ReLU output: zero where the
            // activation was clamped.
            let mut next_delta = vec![0.0; rows * layer.in_dim];
            for r in 0..rows {
                let d = &delta[r * layer.out_dim..(r + 1) * layer.out_dim];
                let nd = &mut next_delta[r * layer.in_dim..(r + 1) * layer.in_dim];
                for (o, &del) in d.iter().enumerate() {
                    if del == 0.0 {
                        continue;
                    }
                    let w = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (n, wi) in nd.iter_mut().zip(w) {
                        *n += del * wi;
                    }
                }
                let act = &prev[r * layer.in_dim..(r + 1) * layer.in_dim];
                for (n, &a) in nd.iter_mut().zip(act) {
                    if a <= 0.0 {
                        *n = 0.0;
                    }
                }
            }
            delta = next_delta;
        }
    }
    Ok((loss, ParamVector::new(grad)))
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(state: &mut AdamState, params: &mut ParamVector, grad: &ParamVector) -> Result<()> {
    if state.dim() != params.dim() || grad.dim() != params.dim() {
        return Err(Error::DimMismatch {
            expected: params.dim(),
            actual: if state.dim() != params.dim() {
                state.dim()
            } else {
                grad.dim()
            },
            context: "adam_step",
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for (((p, g), m), v) in params
        .values_mut()
        .iter_mut()
        .zip(grad.values())
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = state.beta1 * *m + (1.0 - state.beta1) * g;
        *v = state.beta2 * *v + (1.0 - state.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

/// Fraction of test rows whose argmax logit matches the label. Ties go to
/// the lowest class index.
pub fn evaluate_accuracy(params: &ParamVector, spec: &MlpSpec, test: &Batch) -> Result<f64> {
    if test.rows() == 0 {
        return Err(Error::InvalidConfig("empty test set".into()));
    }
    let logits = forward(params, spec, test)?;
    let c = spec.num_classes();
    let mut correct = 0usize;
    for (r, &label) in test.labels().iter().enumerate() {
        let row = &logits[r * c..(r + 1) * c];
        let mut best = 0usize;
        for (k, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = k;
            }
        }
        if best == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.rows() as f64)
}
