use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::model::{GlobalModel, ModelDims};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Local epochs `E` per round.
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub hidden_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 1, learning_rate: 0.01, batch_size: 32, hidden_dim: 64 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidInput("fl.epochs must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidInput(format!("fl.learning_rate must be non-negative, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidInput("fl.batch_size must be at least 1".into()));
        }
        if self.hidden_dim == 0 {
            return Err(Error::InvalidInput("fl.hidden_dim must be at least 1".into()));
        }
        Ok(())
    }
}

/// Parameters a device sends back after local training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalUpdate {
    pub device_id: usize,
    pub params: Vec<f64>,
    pub dataset_size: usize,
    /// Mean loss over the last local epoch.
    pub train_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// Mean cross-entropy.
    pub loss: f64,
}

/// Scratch buffers for one forward/backward pass.
struct Workspace {
    hidden: Vec<f64>,
    logits: Vec<f64>,
    grad_hidden: Vec<f64>,
}

impl Workspace {
    fn new(dims: &ModelDims) -> Self {
        Self {
            hidden: vec![0.0; dims.hidden_dim],
            logits: vec![0.0; dims.num_classes],
            grad_hidden: vec![0.0; dims.hidden_dim],
        }
    }
}

/// Hidden activations and logits for one sample, left in `ws`.
fn forward(dims: &ModelDims, params: &[f64], x: &[f64], ws: &mut Workspace) {
    let (w1, rest) = params.split_at(dims.b1_offset());
    let (b1, rest) = rest.split_at(dims.hidden_dim);
    let (w2, b2) = rest.split_at(dims.hidden_dim * dims.num_classes);
    for (j, h) in ws.hidden.iter_mut().enumerate() {
        let row = &w1[j * dims.input_dim..(j + 1) * dims.input_dim];
        let z = b1[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        *h = z.max(0.0);
    }
    for (c, l) in ws.logits.iter_mut().enumerate() {
        let row = &w2[c * dims.hidden_dim..(c + 1) * dims.hidden_dim];
        *l = b2[c] + row.iter().zip(&ws.hidden).map(|(w, h)| w * h).sum::<f64>();
    }
}

/// Turns the logits in place into softmax probabilities and returns the
/// cross-entropy for `label`.
fn softmax_loss(logits: &mut [f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        total += *l;
    }
    let loss = total.ln() - (logits[label].ln());
    for l in logits.iter_mut() {
        *l /= total;
    }
    loss
}

/// Adds the gradient of one sample's loss, scaled by `scale`, into `grad`.
fn accumulate(dims: &ModelDims, params: &[f64], x: &[f64], label: usize, scale: f64, ws: &mut Workspace, grad: &mut [f64]) -> f64 {
    forward(dims, params, x, ws);
    let loss = softmax_loss(&mut ws.logits, label);
    ws.logits[label] -= 1.0;

    let w2 = &params[dims.w2_offset()..dims.b2_offset()];
    ws.grad_hidden.iter_mut().for_each(|g| *g = 0.0);
    let (g_w1, g_rest) = grad.split_at_mut(dims.b1_offset());
    let (g_b1, g_rest) = g_rest.split_at_mut(dims.hidden_dim);
    let (g_w2, g_b2) = g_rest.split_at_mut(dims.hidden_dim * dims.num_classes);
    for c in 0..dims.num_classes {
        let d = ws.logits[c] * scale;
        g_b2[c] += d;
        let row = c * dims.hidden_dim;
        for j in 0..dims.hidden_dim {
            g_w2[row + j] += d * ws.hidden[j];
            ws.grad_hidden[j] += ws.logits[c] * w2[row + j];
        }
    }
    for j in 0..dims.hidden_dim {
        if ws.hidden[j] <= 0.0 {
            continue;
        }
        let d = ws.grad_hidden[j] * scale;
        g_b1[j] += d;
        let row = &mut g_w1[j * dims.input_dim..(j + 1) * dims.input_dim];
        for (g, v) in row.iter_mut().zip(x) {
            *g += d * v;
        }
    }
    loss
}

fn check_shapes(dims: &ModelDims, params: &[f64], data: &Dataset) -> Result<()> {
    if params.len() != dims.param_count() {
        return Err(Error::ShapeMismatch { expected: dims.param_count(), got: params.len() });
    }
    if data.feature_dim() != dims.input_dim {
        return Err(Error::InvalidInput(format!(
            "dataset has {} features, model expects {}",
            data.feature_dim(),
            dims.input_dim
        )));
    }
    if data.num_classes() > dims.num_classes {
        return Err(Error::InvalidInput(format!(
            "dataset has {} classes, model has {}",
            data.num_classes(),
            dims.num_classes
        )));
    }
    Ok(())
}

/// Mean cross-entropy over the samples `indices` and its gradient with
/// respect to the flat parameter vector.
pub fn loss_and_gradient(dims: &ModelDims, params: &[f64], data: &Dataset, indices: &[usize]) -> Result<(f64, Vec<f64>)> {
    check_shapes(dims, params, data)?;
    if indices.is_empty() {
        return Err(Error::NoData("gradient over an empty batch".into()));
    }
    let mut grad = vec![0.0; params.len()];
    let mut ws = Workspace::new(dims);
    let scale = 1.0 / indices.len() as f64;
    let mut loss = 0.0;
    for &i in indices {
        loss += accumulate(dims, params, data.row(i), data.labels()[i], scale, &mut ws, &mut grad);
    }
    Ok((loss * scale, grad))
}

/// Runs `config.epochs` epochs of mini-batch SGD from the global model on
/// `data`, reshuffling every epoch from `seed`.
pub fn local_train(device_id: usize, model: &GlobalModel, data: &Dataset, config: &TrainConfig, seed: u64) -> Result<LocalUpdate> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::NoData(format!("device {device_id} has no training samples")));
    }
    let dims = model.dims;
    check_shapes(&dims, &model.params, data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = model.params.clone();
    let mut grad = vec![0.0; params.len()];
    let mut ws = Workspace::new(&dims);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_loss = 0.0;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                total += accumulate(&dims, &params, data.row(i), data.labels()[i], scale, &mut ws, &mut grad);
            }
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= config.learning_rate * g;
            }
        }
        epoch_loss = total / data.len() as f64;
        if !epoch_loss.is_finite() || params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { epoch, loss: epoch_loss });
        }
    }
    Ok(LocalUpdate { device_id, params, dataset_size: data.len(), train_loss: epoch_loss })
}

/// Accuracy and mean loss on `test`. Argmax ties go to the lowest class.
pub fn evaluate(model: &GlobalModel, test: &Dataset) -> Result<Evaluation> {
    check_shapes(&model.dims, &model.params, test)?;
    if test.is_empty() {
        return Err(Error::NoData("empty test set".into()));
    }
    let mut ws = Workspace::new(&model.dims);
    let mut correct = 0usize;
    let mut loss = 0.0;
    for (i, &label) in test.labels().iter().enumerate() {
        forward(&model.dims, &model.params, test.row(i), &mut ws);
        let mut best = 0;
        for c in 1..ws.logits.len() {
            if ws.logits[c] > ws.logits[best] {
                best = c;
            }
        }
        if best == label {
            correct += 1;
        }
        loss += softmax_loss(&mut ws.logits, label);
    }
    let n = test.len() as f64;
    Ok(Evaluation { accuracy: correct as f64 / n, loss: loss / n })
}
