//! Three-layer MLP countermeasure: two hidden layers and a two-way softmax
//! (index 0 = bonafide, 1 = spoof), trained by plain mini-batch SGD on mean
//! cross-entropy with optional L2 on the weights.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 6] = b"SSMLP1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }

    fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
        }
    }
}

/// Dense layer; `weights[i * outputs + j]` connects input `i` to output `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.biases.clone();
        for (i, xi) in x.iter().enumerate() {
            let row = &self.weights[i * self.outputs..(i + 1) * self.outputs];
            out.iter_mut().zip(row).for_each(|(o, w)| *o += xi * w);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    pub activation: Activation,
    pub seed: u64,
}

/// Gradients with the same layout as the model parameters.
pub type Gradients = Vec<Layer>;

pub fn init_model(layer_dims: &[usize], activation: Activation, seed: u64) -> Result<MlpModel> {
    if layer_dims.len() != 4 {
        return Err(Error::BadDims(format!(
            "expected [d_in, h1, h2, 2], got {} entries",
            layer_dims.len()
        )));
    }
    if layer_dims[3] != 2 {
        return Err(Error::BadDims(format!(
            "output dim must be 2, got {}",
            layer_dims[3]
        )));
    }
    if layer_dims.contains(&0) {
        return Err(Error::BadDims("zero-width layer".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = layer_dims
        .windows(2)
        .map(|w| {
            let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
            let mut layer = Layer::zeros(w[0], w[1]);
            layer
                .weights
                .iter_mut()
                .for_each(|v| *v = rng.random_range(-limit..limit));
            layer
        })
        .collect();
    Ok(MlpModel {
        layers,
        activation,
        seed,
    })
}

fn softmax2(z: &[f64]) -> [f64; 2] {
    let m = z[0].max(z[1]);
    let (e0, e1) = ((z[0] - m).exp(), (z[1] - m).exp());
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

/// Cached activations of one forward pass: input, both hidden layers, output logits.
struct Trace {
    acts: Vec<Vec<f64>>,
    logits: Vec<f64>,
}

impl MlpModel {
    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn trace(&self, x: &[f64]) -> Trace {
        let mut acts = vec![x.to_vec()];
        let last = self.layers.len() - 1;
        let mut logits = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(acts.last().unwrap());
            if i == last {
                logits = z;
            } else {
                acts.push(z.into_iter().map(|v| self.activation.apply(v)).collect());
            }
        }
        Trace { acts, logits }
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    pub fn set_params(&mut self, params: &[f64]) {
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weights
                .iter_mut()
                .chain(l.biases.iter_mut())
                .for_each(|p| {
                    *p = it.next().expect("parameter vector too short");
                });
        }
    }
}

/// Class probabilities `[p_bonafide, p_spoof]`.
pub fn forward(m: &MlpModel, x: &[f64]) -> Result<[f64; 2]> {
    m.check_input(x)?;
    Ok(softmax2(&m.trace(x).logits))
}

/// `ln p_bonafide - ln p_spoof`, i.e. the logit difference.
pub fn score(m: &MlpModel, x: &[f64]) -> Result<f64> {
    m.check_input(x)?;
    let z = m.trace(x).logits;
    Ok(z[0] - z[1])
}

fn check_batch(m: &MlpModel, batch: &[(Vec<f64>, usize)]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for (x, y) in batch {
        m.check_input(x)?;
        if *y > 1 {
            return Err(Error::InvalidLabel(*y));
        }
    }
    Ok(())
}

/// `mean(-ln p_y) + l2 * ||W||^2 / 2` (biases are not penalized).
pub fn loss(m: &MlpModel, batch: &[(Vec<f64>, usize)], l2: f64) -> Result<f64> {
    check_batch(m, batch)?;
    let ce: f64 = batch
        .iter()
        .map(|(x, y)| {
            let z = m.trace(x).logits;
            let mx = z[0].max(z[1]);
            let lse = mx + ((z[0] - mx).exp() + (z[1] - mx).exp()).ln();
            lse - z[*y]
        })
        .sum::<f64>()
        / batch.len() as f64;
    Ok(ce + 0.5 * l2 * weight_norm_sq(m))
}

fn weight_norm_sq(m: &MlpModel) -> f64 {
    m.layers
        .iter()
        .flat_map(|l| &l.weights)
        .map(|w| w * w)
        .sum()
}

/// Backpropagated gradient of [`loss`].
pub fn grad(m: &MlpModel, batch: &[(Vec<f64>, usize)], l2: f64) -> Result<Gradients> {
    check_batch(m, batch)?;
    let mut g: Gradients = m
        .layers
        .iter()
        .map(|l| Layer::zeros(l.inputs, l.outputs))
        .collect();
    let scale = 1.0 / batch.len() as f64;
    for (x, y) in batch {
        let t = m.trace(x);
        let p = softmax2(&t.logits);
        let mut delta: Vec<f64> = (0..2)
            .map(|k| p[k] - if k == *y { 1.0 } else { 0.0 })
            .collect();
        for li in (0..m.layers.len()).rev() {
            let layer = &m.layers[li];
            let input = &t.acts[li];
            let gl = &mut g[li];
            for (i, a) in input.iter().enumerate() {
                let row = &mut gl.weights[i * layer.outputs..(i + 1) * layer.outputs];
                row.iter_mut()
                    .zip(&delta)
                    .for_each(|(gw, d)| *gw += scale * a * d);
            }
            gl.biases
                .iter_mut()
                .zip(&delta)
                .for_each(|(gb, d)| *gb += scale * d);
            if li > 0 {
                delta = (0..layer.inputs)
                    .map(|i| {
                        let row = &layer.weights[i * layer.outputs..(i + 1) * layer.outputs];
                        let back: f64 = row.iter().zip(&delta).map(|(w, d)| w * d).sum();
                        back * m.activation.derivative(input[i])
                    })
                    .collect();
            }
        }
    }
    if l2 > 0.0 {
        for (gl, l) in g.iter_mut().zip(&m.layers) {
            gl.weights
                .iter_mut()
                .zip(&l.weights)
                .for_each(|(gw, w)| *gw += l2 * w);
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 200,
            batch_size: 16,
            l2: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(
                "learning rate must be positive".into(),
            ));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "epochs and batch size must be at least 1".into(),
            ));
        }
        if !(self.l2 >= 0.0) {
            return Err(Error::InvalidConfig("l2 must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Mini-batch SGD. Returns the trained model and the mean loss of each epoch.
/// The shuffle order is drawn from `cfg.seed`, so runs are reproducible.
pub fn train(
    model: &MlpModel,
    data: &[(Vec<f64>, usize)],
    cfg: &TrainConfig,
) -> Result<(MlpModel, Vec<f64>)> {
    cfg.validate()?;
    check_batch(model, data)?;
    let mut m = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(Vec<f64>, usize)> = chunk.iter().map(|&i| data[i].clone()).collect();
            epoch_loss += loss(&m, &batch, cfg.l2)? * batch.len() as f64;
            let g = grad(&m, &batch, cfg.l2)?;
            for (l, gl) in m.layers.iter_mut().zip(&g) {
                l.weights
                    .iter_mut()
                    .zip(&gl.weights)
                    .for_each(|(w, d)| *w -= cfg.learning_rate * d);
                l.biases
                    .iter_mut()
                    .zip(&gl.biases)
                    .for_each(|(b, d)| *b -= cfg.learning_rate * d);
            }
        }
        history.push(epoch_loss / data.len() as f64);
    }
    Ok((m, history))
}

/// Fraction of examples whose argmax class matches the label.
pub fn accuracy(m: &MlpModel, data: &[(Vec<f64>, usize)]) -> Result<f64> {
    check_batch(m, data)?;
    let mut hits = 0;
    for (x, y) in data {
        let p = forward(m, x)?;
        let pred = if p[0] >= p[1] { 0 } else { 1 };
        hits += usize::from(pred == *y);
    }
    Ok(hits as f64 / data.len() as f64)
}

/// Per-dimension mean and standard deviation used to whiten model inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyDataset)?;
        let d = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            mean.iter_mut().zip(r).for_each(|(m, v)| *m += v / n);
        }
        let mut var = vec![0.0; d];
        for r in rows {
            var.iter_mut()
                .zip(r.iter().zip(&mean))
                .for_each(|(s, (v, m))| *s += (v - m) * (v - m) / n);
        }
        // constant columns pass through unscaled
        let std = var
            .into_iter()
            .map(|v| if v > 0.0 { v.sqrt() } else { 1.0 })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    /// Rewrite the first layer so the model accepts raw (unwhitened) inputs.
    pub fn fold_into(&self, m: &mut MlpModel) {
        let l = &mut m.layers[0];
        for i in 0..l.inputs {
            for j in 0..l.outputs {
                let w = l.weights[i * l.outputs + j] / self.std[i];
                l.weights[i * l.outputs + j] = w;
                l.biases[j] -= w * self.mean[i];
            }
        }
    }
}

/// Serialize as: magic `SSMLP1`, activation u8, seed u64, layer count u32,
/// layer dims u32 each, then per layer the row-major weights and the biases
/// as little-endian f64.
pub fn encode_model(m: &MlpModel) -> Vec<u8> {
    let dims = m.layer_dims();
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.push(m.activation.tag());
    out.extend_from_slice(&m.seed.to_le_bytes());
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for p in m.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<MlpModel> {
    let bad = |msg: &str| Error::BadModel(msg.to_string());
    if bytes.len() < 19 || &bytes[..6] != MODEL_MAGIC {
        return Err(bad("missing SSMLP1 magic"));
    }
    let activation = match bytes[6] {
        0 => Activation::Relu,
        1 => Activation::Tanh,
        t => return Err(Error::BadModel(format!("unknown activation tag {t}"))),
    };
    let seed = u64::from_le_bytes(bytes[7..15].try_into().unwrap());
    let n_dims = u32::from_le_bytes(bytes[15..19].try_into().unwrap()) as usize;
    let dims_end = 19 + 4 * n_dims;
    if n_dims != 4 || bytes.len() < dims_end {
        return Err(bad("layer dims"));
    }
    let dims: Vec<usize> = bytes[19..dims_end]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let mut m = init_model(&dims, activation, seed)?;
    let n_params = m.params().len();
    let payload = &bytes[dims_end..];
    if payload.len() != 8 * n_params {
        return Err(Error::BadModel(format!(
            "expected {} parameter bytes, found {}",
            8 * n_params,
            payload.len()
        )));
    }
    let params: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if params.iter().any(|p| !p.is_finite()) {
        return Err(bad("non-finite parameter"));
    }
    m.set_params(&params);
    Ok(m)
}

pub fn save_model(path: impl AsRef<Path>, m: &MlpModel) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_model(m)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MlpModel> {
    let path = path.as_ref();
    decode_model(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
