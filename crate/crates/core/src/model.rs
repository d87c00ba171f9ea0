//! A small from-scratch classifier and its local trainer.
//!
//! Two architectures are supported: multinomial logistic regression and a
//! one-hidden-layer ReLU perceptron. Parameters live in one flat vector laid
//! out layer by layer as `[W (in x out, row-major), b (out)]`, which is what
//! the aggregators average.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::{ClientDataset, ClientPopulation};
use crate::rng::{stream_rng, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Architecture {
    Linear,
    Mlp { hidden: usize },
}

impl Architecture {
    /// `(fan_in, fan_out)` of each dense layer.
    fn layers(&self, input: usize, classes: usize) -> Vec<(usize, usize)> {
        match *self {
            Architecture::Linear => vec![(input, classes)],
            Architecture::Mlp { hidden } => vec![(input, hidden), (hidden, classes)],
        }
    }

    pub fn num_params(&self, input: usize, classes: usize) -> usize {
        self.layers(input, classes).iter().map(|&(i, o)| i * o + o).sum()
    }

    fn validate(&self, input: usize, classes: usize) -> Result<()> {
        if input == 0 {
            return Err(Error::config("model.input_dim", "must be at least 1"));
        }
        if classes == 0 {
            return Err(Error::config("model.num_classes", "must be at least 1"));
        }
        if let Architecture::Mlp { hidden: 0 } = self {
            return Err(Error::config("model.hidden", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub arch: Architecture,
    pub input_dim: usize,
    pub num_classes: usize,
    pub weights: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(arch: Architecture, input_dim: usize, num_classes: usize) -> Result<Self> {
        arch.validate(input_dim, num_classes)?;
        Ok(ModelParams {
            arch,
            input_dim,
            num_classes,
            weights: vec![0.0; arch.num_params(input_dim, num_classes)],
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    fn layers(&self) -> Vec<(usize, usize)> {
        self.arch.layers(self.input_dim, self.num_classes)
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Self {
        assert_eq!(weights.len(), self.weights.len());
        ModelParams {
            weights,
            ..self.clone()
        }
    }
}

/// Uniform `±1/sqrt(fan_in)` weights, zero biases.
pub fn init_model(seed: u64, arch: Architecture, input_dim: usize, num_classes: usize) -> Result<ModelParams> {
    let mut params = ModelParams::zeros(arch, input_dim, num_classes)?;
    let mut rng = stream_rng(seed, Stream::ModelInit, &[]);
    let mut offset = 0;
    for (fan_in, fan_out) in params.layers() {
        let bound = 1.0 / (fan_in as f64).sqrt();
        for w in &mut params.weights[offset..offset + fan_in * fan_out] {
            *w = rng.random_range(-bound..bound);
        }
        offset += fan_in * fan_out + fan_out;
    }
    Ok(params)
}

/// Scratch buffers for forward/backward passes, reused across samples.
struct Workspace {
    /// Activations per layer boundary: `acts[0]` is the input.
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
    offsets: Vec<usize>,
}

impl Workspace {
    fn new(layers: &[(usize, usize)]) -> Self {
        let mut acts = vec![vec![0.0; layers[0].0]];
        let mut deltas = vec![vec![0.0; layers[0].0]];
        for &(_, o) in layers {
            acts.push(vec![0.0; o]);
            deltas.push(vec![0.0; o]);
        }
        let offsets = layers
            .iter()
            .scan(0, |acc, &(i, o)| {
                let start = *acc;
                *acc += i * o + o;
                Some(start)
            })
            .collect();
        Workspace { acts, deltas, offsets }
    }
}

fn forward(weights: &[f64], layers: &[(usize, usize)], x: &[f64], ws: &mut Workspace) {
    ws.acts[0].copy_from_slice(x);
    let mut offset = 0;
    let last = layers.len() - 1;
    for (l, &(fan_in, fan_out)) in layers.iter().enumerate() {
        let w = &weights[offset..offset + fan_in * fan_out];
        let b = &weights[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
        let (lower, upper) = ws.acts.split_at_mut(l + 1);
        let input = &lower[l];
        let out = &mut upper[0];
        out.copy_from_slice(b);
        for (i, &xi) in input.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &w[i * fan_out..(i + 1) * fan_out];
            for (o, &wij) in out.iter_mut().zip(row) {
                *o += xi * wij;
            }
        }
        if l < last {
            out.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        offset += fan_in * fan_out + fan_out;
    }
}

/// In-place softmax; returns log-sum-exp of the original logits.
fn softmax(logits: &mut [f64]) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    logits.iter_mut().for_each(|v| *v /= sum);
    max + sum.ln()
}

/// Forward + backward for one sample, accumulating into `grad`. Returns the
/// cross-entropy loss of the sample.
fn accumulate_sample(
    weights: &[f64],
    layers: &[(usize, usize)],
    x: &[f64],
    y: usize,
    ws: &mut Workspace,
    grad: &mut [f64],
) -> f64 {
    forward(weights, layers, x, ws);
    let top = layers.len();
    let logit_y = ws.acts[top][y];
    let lse = softmax(&mut ws.acts[top]);
    let loss = lse - logit_y;
    ws.deltas[top].copy_from_slice(&ws.acts[top]);
    ws.deltas[top][y] -= 1.0;

    for l in (0..layers.len()).rev() {
        let (fan_in, fan_out) = layers[l];
        let off = ws.offsets[l];
        let (dlow, dup) = ws.deltas.split_at_mut(l + 1);
        let delta = &dup[0];
        let input = &ws.acts[l];
        {
            let gw = &mut grad[off..off + fan_in * fan_out];
            for (i, &xi) in input.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                for (g, &d) in gw[i * fan_out..(i + 1) * fan_out].iter_mut().zip(delta.iter()) {
                    *g += xi * d;
                }
            }
        }
        for (g, &d) in grad[off + fan_in * fan_out..off + fan_in * fan_out + fan_out]
            .iter_mut()
            .zip(delta.iter())
        {
            *g += d;
        }
        if l > 0 {
            let w = &weights[off..off + fan_in * fan_out];
            let below = &mut dlow[l];
            for (i, bi) in below.iter_mut().enumerate() {
                if input[i] <= 0.0 {
                    *bi = 0.0;
                    continue;
                }
                let row = &w[i * fan_out..(i + 1) * fan_out];
                *bi = row.iter().zip(delta.iter()).map(|(a, b)| a * b).sum();
            }
        }
    }
    loss
}

/// Mean cross-entropy loss and its gradient over the given points of `data`.
pub fn loss_and_grad(params: &ModelParams, data: &ClientDataset, indices: &[usize]) -> (f64, Vec<f64>) {
    let layers = params.layers();
    let mut ws = Workspace::new(&layers);
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    for &i in indices {
        let (x, y) = data.point(i);
        loss += accumulate_sample(&params.weights, &layers, x, y, &mut ws, &mut grad);
    }
    let scale = 1.0 / indices.len() as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    (loss * scale, grad)
}

/// Mean cross-entropy loss without the gradient.
pub fn loss(params: &ModelParams, data: &ClientDataset, indices: &[usize]) -> f64 {
    let layers = params.layers();
    let mut ws = Workspace::new(&layers);
    let top = layers.len();
    let mut total = 0.0;
    for &i in indices {
        let (x, y) = data.point(i);
        forward(&params.weights, &layers, x, &mut ws);
        let logit_y = ws.acts[top][y];
        total += softmax(&mut ws.acts[top]) - logit_y;
    }
    total / indices.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalTrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
}

fn default_momentum() -> f64 {
    0.9
}

impl LocalTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("training.batch_size", "must be at least 1"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::config("training.lr", "must be finite and > 0"));
        }
        if !(self.momentum.is_finite() && (0.0..1.0).contains(&self.momentum)) {
            return Err(Error::config("training.momentum", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalTrainReport {
    pub client_id: usize,
    pub params: ModelParams,
    /// `u_k`, the number of mini-batch steps taken.
    pub num_local_updates: usize,
    pub samples_processed: usize,
}

/// Number of samples a client processes for `passes` training passes:
/// `round(E * n_k)`, but at least `min(B, n_k)` and at least one.
pub fn samples_for_passes(passes: f64, n_k: usize, batch_size: usize) -> usize {
    let raw = (passes * n_k as f64).round() as usize;
    raw.max(batch_size.min(n_k)).max(1)
}

/// Run `passes` training passes of mini-batch SGD with momentum over one
/// client's data, starting from `params`. Each pass visits the local points
/// in a fresh seeded permutation; a fractional final pass takes a prefix of
/// its permutation. The momentum buffer starts at zero.
pub fn local_train(
    params: &ModelParams,
    data: &ClientDataset,
    passes: f64,
    cfg: &LocalTrainConfig,
    seed: u64,
    round: usize,
) -> Result<LocalTrainReport> {
    let fault = |reason: String| Error::Training {
        round,
        client: data.client_id,
        reason,
    };
    if data.is_empty() {
        return Err(fault("client holds no data".into()));
    }
    if !(passes.is_finite() && passes > 0.0) {
        return Err(fault(format!("training passes must be > 0, got {passes}")));
    }
    cfg.validate()?;

    let n = data.len();
    let total = samples_for_passes(passes, n, cfg.batch_size);
    let mut rng = stream_rng(seed, Stream::LocalShuffle, &[round as u64, data.client_id as u64]);
    let mut order = Vec::with_capacity(total);
    let mut perm: Vec<usize> = (0..n).collect();
    while order.len() < total {
        perm.shuffle(&mut rng);
        let take = (total - order.len()).min(n);
        order.extend_from_slice(&perm[..take]);
    }

    let layers = params.layers();
    let mut ws = Workspace::new(&layers);
    let mut w = params.weights.clone();
    let mut velocity = vec![0.0; w.len()];
    let mut grad = vec![0.0; w.len()];
    let mut steps = 0;
    for batch in order.chunks(cfg.batch_size) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut batch_loss = 0.0;
        for &i in batch {
            let (x, y) = data.point(i);
            batch_loss += accumulate_sample(&w, &layers, x, y, &mut ws, &mut grad);
        }
        if !batch_loss.is_finite() {
            return Err(fault(format!("non-finite loss at local step {steps}")));
        }
        let scale = 1.0 / batch.len() as f64;
        for ((wi, vi), gi) in w.iter_mut().zip(velocity.iter_mut()).zip(grad.iter()) {
            *vi = cfg.momentum * *vi + gi * scale;
            *wi -= cfg.lr * *vi;
        }
        steps += 1;
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(fault("non-finite parameters after local training".into()));
    }
    Ok(LocalTrainReport {
        client_id: data.client_id,
        params: params.with_weights(w),
        num_local_updates: steps,
        samples_processed: total,
    })
}

pub fn predict(params: &ModelParams, x: &[f64]) -> usize {
    let layers = params.layers();
    let mut ws = Workspace::new(&layers);
    predict_with(params, &layers, x, &mut ws)
}

fn predict_with(params: &ModelParams, layers: &[(usize, usize)], x: &[f64], ws: &mut Workspace) -> usize {
    forward(&params.weights, layers, x, ws);
    let logits = &ws.acts[layers.len()];
    let mut best = 0;
    for (c, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = c;
        }
    }
    best
}

/// Fraction of correctly classified points over every client of `test`.
pub fn evaluate(params: &ModelParams, test: &ClientPopulation) -> f64 {
    let layers = params.layers();
    let mut ws = Workspace::new(&layers);
    let mut correct = 0usize;
    let mut total = 0usize;
    for client in &test.clients {
        for i in 0..client.len() {
            let (x, y) = client.point(i);
            if predict_with(params, &layers, x, &mut ws) == y {
                correct += 1;
            }
            total += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    }
}

/// Cost proxies for one model: forward FLOPs for a single input and the
/// parameter count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub flops_per_input: f64,
    pub num_params: f64,
}

/// Analytic descriptor: two FLOPs per weight-matrix entry (multiply + add).
pub fn descriptor(arch: Architecture, input_dim: usize, num_classes: usize) -> Result<ModelDescriptor> {
    arch.validate(input_dim, num_classes)?;
    let macs: usize = arch.layers(input_dim, num_classes).iter().map(|&(i, o)| i * o).sum();
    Ok(ModelDescriptor {
        flops_per_input: 2.0 * macs as f64,
        num_params: arch.num_params(input_dim, num_classes) as f64,
    })
}

/// Published ResNet descriptors, for carrying realistic cost magnitudes into
/// small simulations.
pub fn preset_descriptor(name: &str) -> Result<ModelDescriptor> {
    let (flops, params) = match name {
        "resnet10" => (12.5e6, 79.7e3),
        "resnet18" => (26.8e6, 177.2e3),
        "resnet26" => (41.1e6, 274.6e3),
        "resnet34" => (60.1e6, 515.6e3),
        other => {
            return Err(Error::config(
                "cost.preset",
                format!("unknown preset `{other}` (expected resnet10, resnet18, resnet26 or resnet34)"),
            ))
        }
    };
    Ok(ModelDescriptor {
        flops_per_input: flops,
        num_params: params,
    })
}
