//! A small dense MLP engine: encoder/head specs, deterministic seeded
//! initialization, forward traces, reverse-mode gradients that accept
//! externally supplied output gradients, and the SGD-momentum / cosine
//! schedule used by the training loops.
//!
//! Everything is f64. Forward and backward are pure given (params, input),
//! so snapshots can be evaluated concurrently; the training loop owns the
//! only mutable copy.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative given the pre-activation and the stored activation value.
    fn derivative(self, pre: f64, post: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - post * post,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Encoder,
    Head,
}

/// Layer sizes from input to output; hidden layers use `activation`, the
/// output layer stays linear.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub role: Role,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, activation: Activation, role: Role) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Config(format!(
                "layer_sizes needs at least input and output entries, got {layer_sizes:?}"
            )));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::Config(format!("zero-width layer in {layer_sizes:?}")));
        }
        Ok(MlpSpec { layer_sizes, activation, role })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }
}

/// Per-layer weights (fan_in x fan_out) and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub rng_seed: u64,
}

/// Gradient (or velocity) storage shaped like an [`Mlp`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Gradients {
            weights: mlp.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            biases: mlp.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
        }
    }

    pub fn get(&self, index: usize) -> f64 {
        flat_get(&self.weights, &self.biases, index)
    }
}

/// Per-layer pre-activations and activations for one batch. Recomputing the
/// forward pass from the same params and input reproduces it bitwise.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: Array2<f64>,
    pub pre: Vec<Array2<f64>>,
    pub post: Vec<Array2<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Array2<f64> {
        self.post.last().expect("trace has at least one layer")
    }
}

/// He-uniform init for relu (bound sqrt(6/fan_in)), Xavier-uniform for tanh;
/// biases zero. Deterministic per seed.
pub fn init_mlp(spec: &MlpSpec, seed: u64) -> Mlp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::with_capacity(spec.n_layers());
    let mut biases = Vec::with_capacity(spec.n_layers());
    for l in 0..spec.n_layers() {
        let fan_in = spec.layer_sizes[l];
        let fan_out = spec.layer_sizes[l + 1];
        let bound = match spec.activation {
            Activation::Relu => (6.0 / fan_in as f64).sqrt(),
            Activation::Tanh => (6.0 / (fan_in + fan_out) as f64).sqrt(),
        };
        let w = Array2::from_shape_fn((fan_in, fan_out), |_| rng.gen_range(-bound..bound));
        weights.push(w);
        biases.push(Array1::zeros(fan_out));
    }
    Mlp { spec: spec.clone(), weights, biases, rng_seed: seed }
}

impl Mlp {
    pub fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    /// Total number of scalar parameters (weights then biases per layer).
    pub fn n_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn get_param(&self, index: usize) -> f64 {
        flat_get(&self.weights, &self.biases, index)
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        flat_set(&mut self.weights, &mut self.biases, index, value)
    }
}

fn flat_get(weights: &[Array2<f64>], biases: &[Array1<f64>], mut index: usize) -> f64 {
    for (w, b) in weights.iter().zip(biases) {
        if index < w.len() {
            return *w.as_slice().unwrap().get(index).unwrap();
        }
        index -= w.len();
        if index < b.len() {
            return b[index];
        }
        index -= b.len();
    }
    panic!("parameter index out of range");
}

fn flat_set(weights: &mut [Array2<f64>], biases: &mut [Array1<f64>], mut index: usize, value: f64) {
    for (w, b) in weights.iter_mut().zip(biases.iter_mut()) {
        if index < w.len() {
            w.as_slice_mut().unwrap()[index] = value;
            return;
        }
        index -= w.len();
        if index < b.len() {
            b[index] = value;
            return;
        }
        index -= b.len();
    }
    panic!("parameter index out of range");
}

/// Affine + activation composition over the batch rows of `x`.
pub fn forward(mlp: &Mlp, x: &Array2<f64>) -> Result<ForwardTrace> {
    if x.ncols() != mlp.input_dim() {
        return Err(Error::shape("forward input width", mlp.input_dim(), x.ncols()));
    }
    let n_layers = mlp.spec.n_layers();
    let mut pre = Vec::with_capacity(n_layers);
    let mut post = Vec::with_capacity(n_layers);
    let mut current = x.clone();
    for l in 0..n_layers {
        let z = current.dot(&mlp.weights[l]) + &mlp.biases[l];
        let a = if l + 1 == n_layers {
            z.clone()
        } else {
            z.mapv(|v| mlp.spec.activation.apply(v))
        };
        pre.push(z);
        current = a.clone();
        post.push(a);
    }
    Ok(ForwardTrace { input: x.clone(), pre, post })
}

/// Reverse-mode gradients of sum(output * d_out) w.r.t. all parameters,
/// plus the gradient w.r.t. the input batch (for chaining head into
/// encoder).
pub fn backward(mlp: &Mlp, trace: &ForwardTrace, d_out: &Array2<f64>) -> Result<(Gradients, Array2<f64>)> {
    let n_layers = mlp.spec.n_layers();
    if trace.pre.len() != n_layers || trace.post.len() != n_layers {
        return Err(Error::shape("trace layer count", n_layers, trace.pre.len()));
    }
    if trace.input.ncols() != mlp.input_dim() {
        return Err(Error::shape("trace input width", mlp.input_dim(), trace.input.ncols()));
    }
    for l in 0..n_layers {
        if trace.pre[l].ncols() != mlp.spec.layer_sizes[l + 1] {
            return Err(Error::shape(
                format!("trace layer {l} width"),
                mlp.spec.layer_sizes[l + 1],
                trace.pre[l].ncols(),
            ));
        }
    }
    if d_out.dim() != trace.output().dim() {
        return Err(Error::shape(
            "d_out shape",
            format!("{:?}", trace.output().dim()),
            format!("{:?}", d_out.dim()),
        ));
    }

    let mut grads = Gradients::zeros_like(mlp);
    // output layer is linear, so dZ at the top equals d_out
    let mut d_z = d_out.clone();
    for l in (0..n_layers).rev() {
        let below = if l == 0 { &trace.input } else { &trace.post[l - 1] };
        grads.weights[l] = below.t().dot(&d_z);
        grads.biases[l] = d_z.sum_axis(ndarray::Axis(0));
        let d_below = d_z.dot(&mlp.weights[l].t());
        if l == 0 {
            return Ok((grads, d_below));
        }
        let act = mlp.spec.activation;
        let mut next = d_below;
        next.zip_mut_with(&trace.pre[l - 1], |g, &p| {
            *g *= act.derivative(p, act.apply(p));
        });
        d_z = next;
    }
    unreachable!("loop returns at l == 0");
}

/// Mean negative log-softmax of the true class, with the logit gradient.
/// Stabilized by per-row max subtraction.
pub fn softmax_cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> Result<(f64, Array2<f64>)> {
    let (n, n_c) = logits.dim();
    if labels.len() != n {
        return Err(Error::shape("labels length", n, labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= n_c) {
        return Err(Error::Config(format!("label {bad} out of range for {n_c} classes")));
    }
    let probs = softmax_rows(logits);
    let mut loss = 0.0;
    let mut d_logits = probs.clone();
    for (i, &y) in labels.iter().enumerate() {
        loss -= probs[[i, y]].max(f64::MIN_POSITIVE).ln();
        d_logits[[i, y]] -= 1.0;
    }
    let inv_n = 1.0 / n as f64;
    d_logits.mapv_inplace(|v| v * inv_n);
    Ok((loss * inv_n, d_logits))
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Classical momentum: v <- momentum * v + grads; params <- params - lr * v.
pub fn sgd_momentum_step(mlp: &mut Mlp, grads: &Gradients, velocity: &mut Gradients, lr: f64, momentum: f64) {
    for l in 0..mlp.weights.len() {
        velocity.weights[l].zip_mut_with(&grads.weights[l], |v, &g| *v = momentum * *v + g);
        mlp.weights[l].zip_mut_with(&velocity.weights[l], |p, &v| *p -= lr * v);
        velocity.biases[l].zip_mut_with(&grads.biases[l], |v, &g| *v = momentum * *v + g);
        mlp.biases[l].zip_mut_with(&velocity.biases[l], |p, &v| *p -= lr * v);
    }
}

/// Cosine annealing: lr_min + (lr0 - lr_min) * (1 + cos(pi * epoch / total)) / 2.
pub fn cosine_lr(lr0: f64, lr_min: f64, epoch: usize, total_epochs: usize) -> f64 {
    if total_epochs == 0 {
        return lr0;
    }
    let t = epoch as f64 / total_epochs as f64;
    lr_min + 0.5 * (lr0 - lr_min) * (1.0 + (std::f64::consts::PI * t).cos())
}

/// Summary of how a saved model was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainingMeta {
    pub dataset: String,
    pub metric: String,
    pub lambda: f64,
    pub epochs: usize,
    pub final_train_accuracy: f64,
    pub final_test_accuracy: f64,
}

/// Encoder + classifier head pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub encoder: Mlp,
    pub head: Mlp,
    pub seed: u64,
    pub training_meta: TrainingMeta,
}

impl MlpModel {
    pub fn new(encoder: Mlp, head: Mlp, seed: u64, training_meta: TrainingMeta) -> Result<Self> {
        if encoder.output_dim() != head.input_dim() {
            return Err(Error::Config(format!(
                "encoder latent dim {} does not match head input dim {}",
                encoder.output_dim(),
                head.input_dim()
            )));
        }
        Ok(MlpModel { encoder, head, seed, training_meta })
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn n_classes(&self) -> usize {
        self.head.output_dim()
    }

    /// Features then logits for a batch.
    pub fn forward_full(&self, x: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        let enc = forward(&self.encoder, x)?;
        let features = enc.output().clone();
        let head = forward(&self.head, &features)?;
        Ok((features, head.output().clone()))
    }
}

#[derive(Serialize, Deserialize)]
struct NetFile {
    spec: MlpSpec,
    weights: Vec<Vec<Vec<f64>>>,
    biases: Vec<Vec<f64>>,
    rng_seed: u64,
}

#[derive(Serialize, Deserialize)]
struct SpecSection {
    encoder: MlpSpec,
    head: MlpSpec,
}

#[derive(Serialize, Deserialize)]
struct WeightsSection {
    encoder: NetFile,
    head: NetFile,
}

/// On-disk model schema: {spec, weights, seed, training_meta}.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    spec: SpecSection,
    weights: WeightsSection,
    seed: u64,
    training_meta: TrainingMeta,
}

fn net_to_file(mlp: &Mlp) -> NetFile {
    NetFile {
        spec: mlp.spec.clone(),
        weights: mlp
            .weights
            .iter()
            .map(|w| w.rows().into_iter().map(|r| r.to_vec()).collect())
            .collect(),
        biases: mlp.biases.iter().map(|b| b.to_vec()).collect(),
        rng_seed: mlp.rng_seed,
    }
}

fn net_from_file(file: NetFile) -> Result<Mlp> {
    let spec = MlpSpec::new(file.spec.layer_sizes.clone(), file.spec.activation, file.spec.role)?;
    if file.weights.len() != spec.n_layers() || file.biases.len() != spec.n_layers() {
        return Err(Error::Model("layer count does not match spec".into()));
    }
    let mut weights = Vec::with_capacity(spec.n_layers());
    let mut biases = Vec::with_capacity(spec.n_layers());
    for l in 0..spec.n_layers() {
        let (fan_in, fan_out) = (spec.layer_sizes[l], spec.layer_sizes[l + 1]);
        let rows = &file.weights[l];
        if rows.len() != fan_in || rows.iter().any(|r| r.len() != fan_out) {
            return Err(Error::Model(format!("weight matrix {l} has wrong shape")));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Model(format!("non-finite weight in layer {l}")));
        }
        weights.push(Array2::from_shape_vec((fan_in, fan_out), flat).unwrap());
        if file.biases[l].len() != fan_out {
            return Err(Error::Model(format!("bias vector {l} has wrong length")));
        }
        biases.push(Array1::from_vec(file.biases[l].clone()));
    }
    Ok(Mlp { spec, weights, biases, rng_seed: file.rng_seed })
}

pub fn save_model(model: &MlpModel, path: &Path) -> Result<()> {
    let file = ModelFile {
        spec: SpecSection { encoder: model.encoder.spec.clone(), head: model.head.spec.clone() },
        weights: WeightsSection {
            encoder: net_to_file(&model.encoder),
            head: net_to_file(&model.head),
        },
        seed: model.seed,
        training_meta: model.training_meta.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::Model(format!("serialize: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_model(path: &Path) -> Result<MlpModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| Error::Model(format!("parse {}: {e}", path.display())))?;
    let encoder = net_from_file(file.weights.encoder)?;
    let head = net_from_file(file.weights.head)?;
    MlpModel::new(encoder, head, file.seed, file.training_meta)
}
