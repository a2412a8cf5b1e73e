use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::{backward_into, cross_entropy, forward, init_params, sgd_step, ModelParams};
use crate::error::{Error, Result};
use crate::gaze::LabeledDataset;
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub input_side: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 10,
            learning_rate: 0.01,
            seed: 0,
            input_side: 64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        // Zero is allowed: it turns training into a dry run.
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        super::check_input_side(self.input_side)
    }

    /// Mini-batches per epoch; the last partial batch is kept.
    pub fn iterations_per_epoch(&self, samples: usize) -> usize {
        samples.div_ceil(self.batch_size)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    /// 1-based.
    pub epoch: usize,
    /// 1-based, counted across epochs.
    pub iteration: usize,
    /// Mean loss over the mini-batch, measured before the update.
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingCurve {
    pub iterations_per_epoch: usize,
    pub iterations: Vec<IterationRecord>,
    /// Per-sample mean loss of each epoch.
    pub epoch_loss: Vec<f64>,
    /// Fraction of training samples classified correctly during each epoch
    /// (predictions made before each batch's update).
    pub epoch_accuracy: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochSummary {
    pub epoch: usize,
    pub iterations: usize,
    pub mean_loss: f64,
    pub accuracy: f64,
}

pub fn train(train_set: &LabeledDataset, cfg: &TrainConfig) -> Result<(ModelParams, TrainingCurve)> {
    train_with_observer(train_set, cfg, |_| {})
}

/// Mini-batch SGD: per epoch the samples are reshuffled, and for each batch
/// the mean gradient over its samples is applied with `cfg.learning_rate`.
/// `observer` sees a summary after every epoch.
pub fn train_with_observer(
    train_set: &LabeledDataset,
    cfg: &TrainConfig,
    mut observer: impl FnMut(&EpochSummary),
) -> Result<(ModelParams, TrainingCurve)> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyInput("training set is empty"));
    }
    let side = cfg.input_side;
    if let Some(s) = train_set.samples.iter().find(|s| s.image.dims() != (side, side)) {
        return Err(Error::Shape(format!(
            "sample {} is {}x{}, model input is {side}x{side}",
            s.sample_id,
            s.image.width(),
            s.image.height()
        )));
    }

    let mut params = init_params(cfg.seed, side)?;
    let mut rng = seed::rng(cfg.seed, seed::stage::SHUFFLE);
    let n = train_set.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut curve = TrainingCurve {
        iterations_per_epoch: cfg.iterations_per_epoch(n),
        ..TrainingCurve::default()
    };
    let mut grads = ModelParams::zeros(side)?;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            grads.scale(0.0);
            let mut batch_loss = 0.0;
            for &i in batch {
                let sample = &train_set.samples[i];
                let (pred, cache) = forward(&params, &sample.image)?;
                batch_loss += cross_entropy(&pred, sample.label);
                correct += usize::from(pred.label == sample.label);
                backward_into(&params, &cache, sample.label, &mut grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            sgd_step(&mut params, &grads, cfg.learning_rate)?;
            loss_sum += batch_loss;
            curve.iterations.push(IterationRecord {
                epoch,
                iteration: curve.iterations.len() + 1,
                loss: batch_loss / batch.len() as f64,
            });
        }
        let summary = EpochSummary {
            epoch,
            iterations: curve.iterations_per_epoch,
            mean_loss: loss_sum / n as f64,
            accuracy: correct as f64 / n as f64,
        };
        curve.epoch_loss.push(summary.mean_loss);
        curve.epoch_accuracy.push(summary.accuracy);
        observer(&summary);
    }
    Ok((params, curve))
}
