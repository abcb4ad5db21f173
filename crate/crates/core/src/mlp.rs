//! Fixed 9-10-12 feed-forward network with logistic activations.
//!
//! Each neuron computes `F(Σ_j w_ij·x_j + θ_i)` with `F(t) = 1/(1+e^{-t})`.
//! Training is plain per-example backpropagation of the halved squared error
//! `E = Σ_k (target_k − out_k)² / 2` against one-hot targets.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gesture::{GestureClass, NUM_CLASSES};

pub const INPUTS: usize = 9;
pub const HIDDEN: usize = 10;
pub const OUTPUTS: usize = NUM_CLASSES;

/// Decision threshold on an output neuron.
pub const THRESHOLD: f64 = 0.5;

/// Full-scale range of the sensor in g; raw readings are divided by it.
pub const SENSOR_FULL_SCALE: f64 = 3.0;

pub const MODEL_MAGIC: &[u8; 4] = b"GMLP";
pub const MODEL_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 3 * 2;
const PARAM_COUNT: usize = HIDDEN * INPUTS + HIDDEN + OUTPUTS * HIDDEN + OUTPUTS;
pub const MODEL_FILE_LEN: usize = HEADER_LEN + PARAM_COUNT * 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MlpError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error("training label must be one of the twelve classes")]
    UnknownLabel,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("model payload truncated: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("model payload has {0} trailing bytes")]
    TrailingBytes(usize),
    #[error("bad model magic")]
    BadMagic,
    #[error("unsupported model version {0}")]
    UnsupportedVersion(u16),
    #[error("model dimensions {found:?} do not match the fixed 9/10/12 topology")]
    DimensionMismatch { found: [u16; 3] },
    #[error("model contains non-finite parameter")]
    NonFinite,
}

/// Network input: three consecutive `(ax, ay, az)` readings, each scaled by
/// the sensor full scale and clamped to `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; INPUTS]);

impl FeatureVector {
    pub fn from_raw(samples: [[f64; 3]; 3]) -> Self {
        let mut out = [0.0; INPUTS];
        for (i, v) in samples.iter().flatten().enumerate() {
            out[i] = normalize(*v);
        }
        FeatureVector(out)
    }

    pub fn distance(&self, other: &FeatureVector) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

pub fn normalize(g: f64) -> f64 {
    if g.is_nan() {
        return 0.0;
    }
    (g / SENSOR_FULL_SCALE).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub input: FeatureVector,
    pub label: GestureClass,
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Anything that can score a feature window against the twelve classes.
pub trait GestureClassifier {
    fn scores(&self, x: &FeatureVector) -> [f64; OUTPUTS];

    fn classify(&self, x: &FeatureVector) -> GestureClass {
        classify_outputs(&self.scores(x), THRESHOLD)
    }
}

/// `Unknown` when no output reaches `threshold`, otherwise the class with
/// the largest output (lowest index wins ties).
pub fn classify_outputs(outputs: &[f64; OUTPUTS], threshold: f64) -> GestureClass {
    let mut best: Option<usize> = None;
    for (i, &o) in outputs.iter().enumerate() {
        if o >= threshold && best.is_none_or(|b| o > outputs[b]) {
            best = Some(i);
        }
    }
    best.map_or(GestureClass::Unknown, |i| GestureClass::ALL[i])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub w_hidden: [[f64; INPUTS]; HIDDEN],
    pub b_hidden: [f64; HIDDEN],
    pub w_out: [[f64; HIDDEN]; OUTPUTS],
    pub b_out: [f64; OUTPUTS],
}

/// Partial derivatives of the example error, laid out like [`MlpModel`].
pub type Gradients = MlpModel;

/// Activations of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct Activations {
    pub hidden: [f64; HIDDEN],
    pub output: [f64; OUTPUTS],
}

impl MlpModel {
    pub fn zeros() -> Self {
        Self {
            w_hidden: [[0.0; INPUTS]; HIDDEN],
            b_hidden: [0.0; HIDDEN],
            w_out: [[0.0; HIDDEN]; OUTPUTS],
            b_out: [0.0; OUTPUTS],
        }
    }

    /// Every parameter drawn uniformly from `[-0.5, 0.5]`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut m = Self::zeros();
        m.for_each_param_mut(|p| *p = rng.random_range(-0.5..=0.5));
        m
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::random(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.w_hidden
            .iter()
            .flatten()
            .chain(self.b_hidden.iter())
            .chain(self.w_out.iter().flatten())
            .chain(self.b_out.iter())
            .copied()
    }

    /// Visits parameters in file order: `w_hidden`, `b_hidden`, `w_out`, `b_out`.
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        self.w_hidden.iter_mut().flatten().for_each(&mut f);
        self.b_hidden.iter_mut().for_each(&mut f);
        self.w_out.iter_mut().flatten().for_each(&mut f);
        self.b_out.iter_mut().for_each(&mut f);
    }

    pub fn param_count(&self) -> usize {
        PARAM_COUNT
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(f64::is_finite)
    }

    pub fn activations(&self, x: &FeatureVector) -> Activations {
        let mut hidden = [0.0; HIDDEN];
        for (h, (row, b)) in hidden.iter_mut().zip(self.w_hidden.iter().zip(&self.b_hidden)) {
            let net: f64 = row.iter().zip(&x.0).map(|(w, xi)| w * xi).sum::<f64>() + b;
            *h = sigmoid(net);
        }
        let mut output = [0.0; OUTPUTS];
        for (o, (row, b)) in output.iter_mut().zip(self.w_out.iter().zip(&self.b_out)) {
            let net: f64 = row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>() + b;
            *o = sigmoid(net);
        }
        Activations { hidden, output }
    }

    pub fn forward(&self, x: &FeatureVector) -> [f64; OUTPUTS] {
        self.activations(x).output
    }

    /// Halved squared error against the one-hot target of `ex.label`.
    pub fn example_error(&self, ex: &TrainingExample) -> f64 {
        let target = one_hot(ex.label);
        self.forward(&ex.input)
            .iter()
            .zip(target.iter())
            .map(|(o, t)| 0.5 * (t - o) * (t - o))
            .sum()
    }

    pub fn gradient(&self, ex: &TrainingExample) -> Gradients {
        self.gradient_for_target(&ex.input, &one_hot(ex.label))
    }

    /// Exact backprop partials of `Σ (target − out)² / 2`.
    pub fn gradient_for_target(&self, x: &FeatureVector, target: &[f64; OUTPUTS]) -> Gradients {
        let act = self.activations(x);
        let mut g = Self::zeros();

        let mut delta_out = [0.0; OUTPUTS];
        for k in 0..OUTPUTS {
            let o = act.output[k];
            delta_out[k] = (o - target[k]) * o * (1.0 - o);
            g.b_out[k] = delta_out[k];
            for j in 0..HIDDEN {
                g.w_out[k][j] = delta_out[k] * act.hidden[j];
            }
        }
        for j in 0..HIDDEN {
            let h = act.hidden[j];
            let back: f64 = (0..OUTPUTS).map(|k| self.w_out[k][j] * delta_out[k]).sum();
            let delta = back * h * (1.0 - h);
            g.b_hidden[j] = delta;
            for i in 0..INPUTS {
                g.w_hidden[j][i] = delta * x.0[i];
            }
        }
        g
    }

    /// `self -= lr · g`
    pub fn descend(&mut self, g: &Gradients, lr: f64) {
        let mut grads = g.params();
        self.for_each_param_mut(|p| *p -= lr * grads.next().unwrap_or(0.0));
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(MODEL_FILE_LEN);
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        for d in [INPUTS, HIDDEN, OUTPUTS] {
            out.extend_from_slice(&(d as u16).to_le_bytes());
        }
        for p in self.params() {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, MlpError> {
        if bytes.len() < HEADER_LEN {
            return Err(MlpError::Truncated {
                expected: HEADER_LEN,
                actual: bytes.len(),
            });
        }
        if &bytes[..4] != MODEL_MAGIC {
            return Err(MlpError::BadMagic);
        }
        let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
        let version = u16_at(4);
        if version != MODEL_VERSION {
            return Err(MlpError::UnsupportedVersion(version));
        }
        let dims = [u16_at(6), u16_at(8), u16_at(10)];
        if dims != [INPUTS as u16, HIDDEN as u16, OUTPUTS as u16] {
            return Err(MlpError::DimensionMismatch { found: dims });
        }
        if bytes.len() < MODEL_FILE_LEN {
            return Err(MlpError::Truncated {
                expected: MODEL_FILE_LEN,
                actual: bytes.len(),
            });
        }
        if bytes.len() > MODEL_FILE_LEN {
            return Err(MlpError::TrailingBytes(bytes.len() - MODEL_FILE_LEN));
        }
        let mut values = bytes[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
        let mut m = Self::zeros();
        m.for_each_param_mut(|p| *p = values.next().expect("length checked"));
        if !m.is_finite() {
            return Err(MlpError::NonFinite);
        }
        Ok(m)
    }
}

impl GestureClassifier for MlpModel {
    fn scores(&self, x: &FeatureVector) -> [f64; OUTPUTS] {
        self.forward(x)
    }
}

pub fn one_hot(label: GestureClass) -> [f64; OUTPUTS] {
    let mut t = [0.0; OUTPUTS];
    if let Some(i) = label.index() {
        t[i] = 1.0;
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    /// Total example presentations, not epochs.
    pub cycles: u64,
    pub seed: u64,
    /// Stop at the end of an epoch once the dataset MSE falls to this value.
    pub target_error: Option<f64>,
    /// Classical momentum coefficient; 0 disables it.
    pub momentum: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.25,
            cycles: 100_000,
            seed: 0,
            target_error: None,
            momentum: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingReport {
    pub initial_mse: f64,
    pub final_mse: f64,
    pub cycles: u64,
    pub duration: Duration,
    /// Training-set accuracy per class, `None` where the class is absent.
    pub per_class_accuracy: [Option<f64>; OUTPUTS],
}

/// Mean over examples and output neurons of `(target − out)²`.
pub fn dataset_mse(m: &MlpModel, data: &[TrainingExample]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let total: f64 = data.iter().map(|ex| 2.0 * m.example_error(ex)).sum();
    total / (data.len() * OUTPUTS) as f64
}

pub fn per_class_accuracy(m: &MlpModel, data: &[TrainingExample]) -> [Option<f64>; OUTPUTS] {
    let mut hits = [0usize; OUTPUTS];
    let mut seen = [0usize; OUTPUTS];
    for ex in data {
        if let Some(i) = ex.label.index() {
            seen[i] += 1;
            if m.classify(&ex.input) == ex.label {
                hits[i] += 1;
            }
        }
    }
    std::array::from_fn(|i| (seen[i] > 0).then(|| hits[i] as f64 / seen[i] as f64))
}

/// Trains a freshly initialised model; see [`train_from`].
pub fn train(data: &[TrainingExample], cfg: &TrainingConfig) -> Result<(MlpModel, TrainingReport), MlpError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = MlpModel::random(&mut rng);
    train_with_rng(init, data, cfg, &mut rng)
}

/// Continues training `init`; shuffling is seeded from `cfg.seed`.
pub fn train_from(
    init: MlpModel,
    data: &[TrainingExample],
    cfg: &TrainingConfig,
) -> Result<(MlpModel, TrainingReport), MlpError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    train_with_rng(init, data, cfg, &mut rng)
}

fn train_with_rng(
    mut model: MlpModel,
    data: &[TrainingExample],
    cfg: &TrainingConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(MlpModel, TrainingReport), MlpError> {
    if data.is_empty() {
        return Err(MlpError::EmptyDataset);
    }
    if data.iter().any(|ex| ex.label == GestureClass::Unknown) {
        return Err(MlpError::UnknownLabel);
    }
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
        return Err(MlpError::InvalidConfig(format!(
            "learning rate must be positive, got {}",
            cfg.learning_rate
        )));
    }
    if !(0.0..1.0).contains(&cfg.momentum) {
        return Err(MlpError::InvalidConfig(format!(
            "momentum must lie in [0, 1), got {}",
            cfg.momentum
        )));
    }
    let mut present = [false; OUTPUTS];
    for ex in data {
        if let Some(i) = ex.label.index() {
            present[i] = true;
        }
    }
    for (i, p) in present.iter().enumerate() {
        if !p {
            log::warn!("class {} has no training examples", GestureClass::ALL[i]);
        }
    }

    let started = Instant::now();
    let initial_mse = dataset_mse(&model, data);
    let mut velocity = MlpModel::zeros();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut done = 0u64;
    'epochs: while done < cfg.cycles {
        order.shuffle(rng);
        for &i in &order {
            if done == cfg.cycles {
                break 'epochs;
            }
            let g = model.gradient(&data[i]);
            if cfg.momentum > 0.0 {
                let mut gi = g.params();
                velocity.for_each_param_mut(|v| {
                    *v = cfg.momentum * *v + gi.next().unwrap_or(0.0);
                });
                model.descend(&velocity, cfg.learning_rate);
            } else {
                model.descend(&g, cfg.learning_rate);
            }
            done += 1;
        }
        if let Some(target) = cfg.target_error {
            if dataset_mse(&model, data) <= target {
                break;
            }
        }
    }

    let report = TrainingReport {
        initial_mse,
        final_mse: dataset_mse(&model, data),
        cycles: done,
        duration: started.elapsed(),
        per_class_accuracy: per_class_accuracy(&model, data),
    };
    Ok((model, report))
}
