//! A small convolutional binary classifier trained from scratch.
//!
//! ```text
//! input (1 x S x S)
//!   -> conv 3x3, 8 filters, zero pad 1 -> ReLU -> maxpool 2x2
//!   -> conv 3x3, 16 filters, zero pad 1 -> ReLU -> maxpool 2x2
//!   -> flatten (16 * S/4 * S/4) -> affine (2) -> softmax
//! ```
//!
//! All arithmetic is `f64`. Output unit 0 is ASD, unit 1 is TD.

mod layers;
mod train;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::gaze::Diagnosis;
use crate::image::GrayImage;
use crate::seed;

pub use train::{train, train_with_observer, EpochSummary, IterationRecord, TrainConfig, TrainingCurve};

pub const CONV1_FILTERS: usize = 8;
pub const CONV2_FILTERS: usize = 16;
pub const CLASSES: usize = 2;
const TAPS: usize = layers::KERNEL * layers::KERNEL;

/// Probability floor applied before taking the log in [`cross_entropy`].
pub const PROBABILITY_FLOOR: f64 = 1e-12;

pub const TENSOR_NAMES: [&str; 6] = [
    "conv1.weight",
    "conv1.bias",
    "conv2.weight",
    "conv2.bias",
    "dense.weight",
    "dense.bias",
];

/// Every trainable tensor. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    input_side: usize,
    /// `[8][1][3][3]`
    pub conv1_w: Vec<f64>,
    pub conv1_b: Vec<f64>,
    /// `[16][8][3][3]`
    pub conv2_w: Vec<f64>,
    pub conv2_b: Vec<f64>,
    /// `[features][2]`, row-major.
    pub dense_w: Vec<f64>,
    pub dense_b: Vec<f64>,
}

pub type Gradients = ModelParams;

pub fn check_input_side(input_side: usize) -> Result<()> {
    if input_side == 0 || !input_side.is_multiple_of(4) {
        return Err(Error::Config(format!(
            "input side {input_side} must be a positive multiple of 4"
        )));
    }
    Ok(())
}

impl ModelParams {
    /// All-zero parameters.
    pub fn zeros(input_side: usize) -> Result<Self> {
        check_input_side(input_side)?;
        let features = Self::feature_count_for(input_side);
        Ok(Self {
            input_side,
            conv1_w: vec![0.0; CONV1_FILTERS * TAPS],
            conv1_b: vec![0.0; CONV1_FILTERS],
            conv2_w: vec![0.0; CONV2_FILTERS * CONV1_FILTERS * TAPS],
            conv2_b: vec![0.0; CONV2_FILTERS],
            dense_w: vec![0.0; features * CLASSES],
            dense_b: vec![0.0; CLASSES],
        })
    }

    /// Rebuild from tensors in [`TENSOR_NAMES`] order, checking every length.
    pub fn from_tensors(input_side: usize, tensors: [Vec<f64>; 6]) -> Result<Self> {
        let template = Self::zeros(input_side)?;
        for ((name, want), got) in template.tensors().iter().zip(&tensors) {
            if want.len() != got.len() {
                return Err(Error::Shape(format!(
                    "tensor {name} has {} entries, expected {}",
                    got.len(),
                    want.len()
                )));
            }
        }
        let [conv1_w, conv1_b, conv2_w, conv2_b, dense_w, dense_b] = tensors;
        Ok(Self {
            input_side,
            conv1_w,
            conv1_b,
            conv2_w,
            conv2_b,
            dense_w,
            dense_b,
        })
    }

    pub fn input_side(&self) -> usize {
        self.input_side
    }

    pub fn feature_count(&self) -> usize {
        Self::feature_count_for(self.input_side)
    }

    fn feature_count_for(input_side: usize) -> usize {
        CONV2_FILTERS * (input_side / 4) * (input_side / 4)
    }

    pub fn tensors(&self) -> [(&'static str, &[f64]); 6] {
        [
            (TENSOR_NAMES[0], &self.conv1_w),
            (TENSOR_NAMES[1], &self.conv1_b),
            (TENSOR_NAMES[2], &self.conv2_w),
            (TENSOR_NAMES[3], &self.conv2_b),
            (TENSOR_NAMES[4], &self.dense_w),
            (TENSOR_NAMES[5], &self.dense_b),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut [f64]); 6] {
        [
            (TENSOR_NAMES[0], &mut self.conv1_w),
            (TENSOR_NAMES[1], &mut self.conv1_b),
            (TENSOR_NAMES[2], &mut self.conv2_w),
            (TENSOR_NAMES[3], &mut self.conv2_b),
            (TENSOR_NAMES[4], &mut self.dense_w),
            (TENSOR_NAMES[5], &mut self.dense_b),
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn fingerprint(&self) -> u64 {
        self.tensors().iter().fold(self.input_side as u64, |h, (_, t)| {
            seed::splitmix64(h ^ seed::fingerprint(t))
        })
    }

    fn scale(&mut self, factor: f64) {
        for (_, t) in self.tensors_mut() {
            for v in t.iter_mut() {
                *v *= factor;
            }
        }
    }
}

/// Fan-in scaled uniform initialization: weights in `[-b, b]` with
/// `b = sqrt(6 / fan_in)`, biases zero.
pub fn init_params(seed: u64, input_side: usize) -> Result<ModelParams> {
    let mut params = ModelParams::zeros(input_side)?;
    let mut rng = seed::rng(seed, seed::stage::INIT);
    let fan_ins = [TAPS, CONV1_FILTERS * TAPS, params.feature_count()];
    let weights: [&mut Vec<f64>; 3] = [&mut params.conv1_w, &mut params.conv2_w, &mut params.dense_w];
    for (tensor, fan_in) in weights.into_iter().zip(fan_ins) {
        let bound = libm::sqrt(6.0 / fan_in as f64);
        for w in tensor.iter_mut() {
            *w = rng.gen_range(-bound..=bound);
        }
    }
    Ok(params)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub probabilities: [f64; CLASSES],
    pub label: Diagnosis,
}

impl Prediction {
    /// Argmax with ties going to class index 0.
    pub fn from_logits(logits: [f64; CLASSES]) -> Self {
        let probabilities = softmax(logits);
        let label = if probabilities[1] > probabilities[0] {
            Diagnosis::Td
        } else {
            Diagnosis::Asd
        };
        Self { probabilities, label }
    }
}

pub fn softmax(logits: [f64; CLASSES]) -> [f64; CLASSES] {
    let m = logits[0].max(logits[1]);
    let e = [libm::exp(logits[0] - m), libm::exp(logits[1] - m)];
    let s = e[0] + e[1];
    [e[0] / s, e[1] / s]
}

/// `-ln p_true` with `p_true` clamped to `[PROBABILITY_FLOOR, 1]`.
pub fn cross_entropy(pred: &Prediction, label: Diagnosis) -> f64 {
    let p = pred.probabilities[label.index()].clamp(PROBABILITY_FLOOR, 1.0);
    -libm::log(p)
}

/// Everything [`backward`] needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ActivationCache {
    params_fingerprint: u64,
    input_side: usize,
    input: Vec<f64>,
    z1: Vec<f64>,
    pooled1: Vec<f64>,
    argmax1: Vec<u32>,
    z2: Vec<f64>,
    features: Vec<f64>,
    argmax2: Vec<u32>,
    pub logits: [f64; CLASSES],
    pub prediction: Prediction,
}

impl ActivationCache {
    /// Distance of this forward pass from the nearest point where the
    /// network is not differentiable: a pooling winner tied with its
    /// runner-up, or sitting on the ReLU hinge. Finite-difference checks are
    /// only valid when the step moves activations by much less than this.
    pub fn smoothness_margin(&self) -> f64 {
        let s = self.input_side;
        layers::pool_margin(&self.z1, CONV1_FILTERS, s).min(layers::pool_margin(&self.z2, CONV2_FILTERS, s / 2))
    }
}

fn check_image(params: &ModelParams, img: &GrayImage) -> Result<()> {
    let s = params.input_side;
    if img.dims() != (s, s) {
        return Err(Error::Shape(format!(
            "model expects {s}x{s} input, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    Ok(())
}

pub fn forward(params: &ModelParams, img: &GrayImage) -> Result<(Prediction, ActivationCache)> {
    check_image(params, img)?;
    let s = params.input_side;
    let input = img.values().to_vec();
    let z1 = layers::conv3x3_forward(&input, 1, s, &params.conv1_w, &params.conv1_b);
    let (pooled1, argmax1) = layers::maxpool2(&layers::relu(&z1), CONV1_FILTERS, s);
    let z2 = layers::conv3x3_forward(&pooled1, CONV1_FILTERS, s / 2, &params.conv2_w, &params.conv2_b);
    let (features, argmax2) = layers::maxpool2(&layers::relu(&z2), CONV2_FILTERS, s / 2);
    let mut logits = [params.dense_b[0], params.dense_b[1]];
    for (f, w) in features.iter().zip(params.dense_w.chunks_exact(CLASSES)) {
        logits[0] += f * w[0];
        logits[1] += f * w[1];
    }
    let prediction = Prediction::from_logits(logits);
    let cache = ActivationCache {
        params_fingerprint: params.fingerprint(),
        input_side: s,
        input,
        z1,
        pooled1,
        argmax1,
        z2,
        features,
        argmax2,
        logits,
        prediction,
    };
    Ok((prediction, cache))
}

/// Forward pass without keeping activations.
pub fn predict(params: &ModelParams, img: &GrayImage) -> Result<Prediction> {
    forward(params, img).map(|(p, _)| p)
}

pub fn predict_batch(params: &ModelParams, imgs: &[GrayImage]) -> Result<Vec<Prediction>> {
    imgs.iter().map(|img| predict(params, img)).collect()
}

/// Gradient of the cross-entropy loss at the logits: `p - onehot(label)`.
pub fn logit_gradient(pred: &Prediction, label: Diagnosis) -> [f64; CLASSES] {
    let mut g = pred.probabilities;
    g[label.index()] -= 1.0;
    g
}

/// Analytic gradients of `cross_entropy(forward(params, x), label)`.
pub fn backward(params: &ModelParams, cache: &ActivationCache, label: Diagnosis) -> Result<Gradients> {
    let mut grads = ModelParams::zeros(params.input_side)?;
    backward_into(params, cache, label, &mut grads)?;
    Ok(grads)
}

/// Like [`backward`] but adds into an existing accumulator.
pub fn backward_into(
    params: &ModelParams,
    cache: &ActivationCache,
    label: Diagnosis,
    grads: &mut Gradients,
) -> Result<()> {
    if cache.input_side != params.input_side
        || grads.input_side != params.input_side
        || cache.params_fingerprint != params.fingerprint()
    {
        return Err(Error::StaleCache);
    }
    let s = params.input_side;
    let dlogits = logit_gradient(&cache.prediction, label);

    grads.dense_b[0] += dlogits[0];
    grads.dense_b[1] += dlogits[1];
    let mut dfeatures = vec![0.0; cache.features.len()];
    for ((f, w), (gw, df)) in cache
        .features
        .iter()
        .zip(params.dense_w.chunks_exact(CLASSES))
        .zip(grads.dense_w.chunks_exact_mut(CLASSES).zip(dfeatures.iter_mut()))
    {
        gw[0] += f * dlogits[0];
        gw[1] += f * dlogits[1];
        *df = w[0] * dlogits[0] + w[1] * dlogits[1];
    }

    let dz2 = layers::unpool_relu(&dfeatures, &cache.argmax2, &cache.z2);
    let mut dpooled1 = vec![0.0; cache.pooled1.len()];
    layers::conv3x3_backward(
        &cache.pooled1,
        CONV1_FILTERS,
        s / 2,
        &params.conv2_w,
        &dz2,
        &mut grads.conv2_w,
        &mut grads.conv2_b,
        Some(&mut dpooled1),
    );

    let dz1 = layers::unpool_relu(&dpooled1, &cache.argmax1, &cache.z1);
    layers::conv3x3_backward(
        &cache.input,
        1,
        s,
        &params.conv1_w,
        &dz1,
        &mut grads.conv1_w,
        &mut grads.conv1_b,
        None,
    );
    Ok(())
}

/// Plain gradient descent, `w <- w - lr * g`, applied to every tensor.
/// Nothing is modified if any gradient entry is non-finite.
pub fn sgd_step(params: &mut ModelParams, grads: &Gradients, learning_rate: f64) -> Result<()> {
    if !(learning_rate >= 0.0) || !learning_rate.is_finite() {
        return Err(Error::Config(format!(
            "learning rate {learning_rate} must be finite and non-negative"
        )));
    }
    if grads.input_side != params.input_side {
        return Err(Error::Shape("gradient and parameter shapes differ".into()));
    }
    for (name, g) in grads.tensors() {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence(name));
        }
    }
    for ((name, w), (_, g)) in params.tensors_mut().into_iter().zip(grads.tensors()) {
        for (w, g) in w.iter_mut().zip(g) {
            *w -= learning_rate * g;
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence(name));
        }
    }
    Ok(())
}
