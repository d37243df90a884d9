//! Fully connected ReLU network with a linear output, trained by mini-batch Adam.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_header, check_training_input, BaselineError};
use crate::matrix::FeatureMatrix;

pub const MLP_FORMAT: &str = "fibpred-mlp";
pub const MLP_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpConfig {
    pub hidden_layers: Vec<usize>,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_layers: vec![100, 100],
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: 32,
            max_epochs: 500,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<(), BaselineError> {
        if self.hidden_layers.contains(&0) {
            return Err(BaselineError::Config("layer widths must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(BaselineError::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(BaselineError::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.adam_epsilon <= 0.0 {
            return Err(BaselineError::Config("Adam decay rates must lie in [0, 1) and epsilon be positive".into()));
        }
        Ok(())
    }
}

/// Dense layer with `weights` stored as `n_out × n_in`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn forward(&self, input: &[f64], out: &mut [f64]) {
        for (o, (w_row, b)) in out.iter_mut().zip(self.weights.chunks_exact(self.n_in).zip(&self.bias)) {
            *o = b + w_row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MlpDoc {
    format: String,
    version: u32,
    layers: Vec<Layer>,
}

/// Per-layer pre-activations and activations for one sample.
struct Scratch {
    z: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
}

impl MlpModel {
    /// Glorot-uniform weights and zero biases for the given widths.
    pub fn init(n_in: usize, hidden: &[usize], rng: &mut impl Rng) -> Self {
        let mut widths = vec![n_in];
        widths.extend_from_slice(hidden);
        widths.push(1);
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Layer {
                    n_in: fan_in,
                    n_out: fan_out,
                    weights: (0..fan_in * fan_out).map(|_| rng.random_range(-limit..=limit)).collect(),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Self { layers }
    }

    pub fn n_inputs(&self) -> usize {
        self.layers.first().map_or(0, |l| l.n_in)
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            p.extend_from_slice(&l.weights);
            p.extend_from_slice(&l.bias);
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<(), BaselineError> {
        if p.len() != self.n_params() {
            return Err(BaselineError::Dimension { expected: self.n_params(), got: p.len() });
        }
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&p[at..at + nw]);
            at += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&p[at..at + nb]);
            at += nb;
        }
        Ok(())
    }

    fn scratch(&self) -> Scratch {
        let widths = self.layers.iter().map(|l| l.n_out);
        Scratch {
            z: widths.clone().map(|w| vec![0.0; w]).collect(),
            a: widths.clone().map(|w| vec![0.0; w]).collect(),
            delta: widths.map(|w| vec![0.0; w]).collect(),
        }
    }

    fn forward_into(&self, x: &[f64], s: &mut Scratch) -> f64 {
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let (prev, rest) = s.a.split_at_mut(k);
            let input = if k == 0 { x } else { &prev[k - 1] };
            layer.forward(input, &mut s.z[k]);
            for (a, &z) in rest[0].iter_mut().zip(&s.z[k]) {
                *a = if k == last || z > 0.0 { z } else { 0.0 };
            }
        }
        s.a[last][0]
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, BaselineError> {
        if x.len() != self.n_inputs() {
            return Err(BaselineError::Dimension { expected: self.n_inputs(), got: x.len() });
        }
        Ok(self.forward_into(x, &mut self.scratch()))
    }

    pub fn predict_batch(&self, x: &FeatureMatrix) -> Result<Vec<f64>, BaselineError> {
        if x.n_cols() != self.n_inputs() {
            return Err(BaselineError::Dimension { expected: self.n_inputs(), got: x.n_cols() });
        }
        let mut s = self.scratch();
        Ok(x.rows().map(|r| self.forward_into(r, &mut s)).collect())
    }

    /// Mean squared error over `rows` and its gradient in [`Self::params`] order.
    pub fn loss_and_gradient(&self, x: &FeatureMatrix, y: &[f64], rows: &[usize]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.n_params()];
        let mut s = self.scratch();
        let loss = self.accumulate(x, y, rows, &mut grad, &mut s);
        (loss, grad)
    }

    fn accumulate(&self, x: &FeatureMatrix, y: &[f64], rows: &[usize], grad: &mut [f64], s: &mut Scratch) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let offsets: Vec<usize> = self
            .layers
            .iter()
            .scan(0, |at, l| {
                let o = *at;
                *at += l.weights.len() + l.bias.len();
                Some(o)
            })
            .collect();
        let scale = 1.0 / rows.len() as f64;
        let last = self.layers.len() - 1;
        let mut loss = 0.0;
        for &r in rows {
            let input = x.row(r);
            let out = self.forward_into(input, s);
            let err = out - y[r];
            loss += err * err;
            s.delta[last][0] = 2.0 * err * scale;
            for k in (0..self.layers.len()).rev() {
                let layer = &self.layers[k];
                let prev: &[f64] = if k == 0 { input } else { &s.a[k - 1] };
                let (gw, gb) = grad[offsets[k]..offsets[k] + layer.weights.len() + layer.bias.len()].split_at_mut(layer.weights.len());
                for (o, &d) in s.delta[k].iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    for (g, &p) in gw[o * layer.n_in..(o + 1) * layer.n_in].iter_mut().zip(prev) {
                        *g += d * p;
                    }
                }
                if k > 0 {
                    let (lower, upper) = s.delta.split_at_mut(k);
                    let below = &mut lower[k - 1];
                    below.iter_mut().for_each(|v| *v = 0.0);
                    for (o, &d) in upper[0].iter().enumerate() {
                        if d == 0.0 {
                            continue;
                        }
                        for (b, &w) in below.iter_mut().zip(&layer.weights[o * layer.n_in..(o + 1) * layer.n_in]) {
                            *b += w * d;
                        }
                    }
                    for (b, &z) in below.iter_mut().zip(&s.z[k - 1]) {
                        if z <= 0.0 {
                            *b = 0.0;
                        }
                    }
                }
            }
        }
        loss * scale
    }

    pub fn to_json(&self) -> String {
        let doc = MlpDoc { format: MLP_FORMAT.into(), version: MLP_VERSION, layers: self.layers.clone() };
        serde_json::to_string(&doc).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, BaselineError> {
        let value: serde_json::Value = serde_json::from_str(s).map_err(|e| BaselineError::Corrupt(e.to_string()))?;
        check_header(&value, MLP_FORMAT, MLP_VERSION)?;
        let doc: MlpDoc = serde_json::from_value(value).map_err(|e| BaselineError::Corrupt(e.to_string()))?;
        let model = Self { layers: doc.layers };
        model.validate().map_err(|e| BaselineError::Corrupt(e.to_string()))?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), BaselineError> {
        if self.layers.is_empty() {
            return Err(BaselineError::Domain("network has no layers".into()));
        }
        for (k, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.n_in * l.n_out || l.bias.len() != l.n_out || l.n_out == 0 {
                return Err(BaselineError::Domain(format!("layer {k} has inconsistent shapes")));
            }
            if k > 0 && self.layers[k - 1].n_out != l.n_in {
                return Err(BaselineError::Domain(format!("layer {k} input width does not match previous layer")));
            }
        }
        if self.layers[self.layers.len() - 1].n_out != 1 {
            return Err(BaselineError::Domain("output layer must have a single unit".into()));
        }
        Ok(())
    }
}

pub fn fit_mlp(x: &FeatureMatrix, y: &[f64], cfg: &MlpConfig) -> Result<MlpModel, BaselineError> {
    fit_mlp_traced(x, y, cfg).map(|(m, _)| m)
}

/// Train and return the mean training loss of every epoch.
pub fn fit_mlp_traced(x: &FeatureMatrix, y: &[f64], cfg: &MlpConfig) -> Result<(MlpModel, Vec<f64>), BaselineError> {
    cfg.validate()?;
    check_training_input(x, y, 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = MlpModel::init(x.n_cols(), &cfg.hidden_layers, &mut rng);
    let n_params = model.n_params();
    let mut params = model.params();
    let (mut m1, mut m2) = (vec![0.0; n_params], vec![0.0; n_params]);
    let mut grad = vec![0.0; n_params];
    let mut scratch = model.scratch();
    let mut order: Vec<usize> = (0..x.n_rows()).collect();
    let mut history = Vec::with_capacity(cfg.max_epochs);
    let mut step = 0i32;
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let loss = model.accumulate(x, y, batch, &mut grad, &mut scratch);
            total += loss * batch.len() as f64;
            step += 1;
            let c1 = 1.0 - cfg.beta1.powi(step);
            let c2 = 1.0 - cfg.beta2.powi(step);
            for i in 0..n_params {
                m1[i] = cfg.beta1 * m1[i] + (1.0 - cfg.beta1) * grad[i];
                m2[i] = cfg.beta2 * m2[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
                params[i] -= cfg.learning_rate * (m1[i] / c1) / ((m2[i] / c2).sqrt() + cfg.adam_epsilon);
            }
            model.set_params(&params)?;
        }
        let mean = total / x.n_rows() as f64;
        if !mean.is_finite() {
            return Err(BaselineError::Divergence { epoch, loss: mean });
        }
        history.push(mean);
    }
    Ok((model, history))
}

pub fn predict_mlp(m: &MlpModel, x: &[f64]) -> Result<f64, BaselineError> {
    m.predict(x)
}
