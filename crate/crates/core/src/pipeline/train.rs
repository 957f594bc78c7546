//! Mini-batch SGD training, convergence detection and knowledge transfer.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use super::metrics::{ConfusionMatrix, Metrics};
use crate::autodiff::{sgd_step, StepDecay};
use crate::model::{FusionVariant, LossWeights, MarsModel};
use crate::{Error, Result};

/// Train-accuracy plateau that counts as converged.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Convergence {
    pub threshold: f64,
    pub patience: usize,
}

impl Default for Convergence {
    fn default() -> Self {
        Self {
            threshold: 0.99,
            patience: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr0: f64,
    pub decay_factor: f64,
    pub decay_every: u64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub loss: LossWeights,
    pub seed: u64,
    pub fusion: FusionVariant,
    pub convergence: Convergence,
    /// End training once the convergence criterion is met.
    pub stop_on_convergence: bool,
    /// End training once evaluation top-1 accuracy reaches this value.
    pub stop_at_eval_accuracy: Option<f64>,
    /// Windows per inference chunk when scoring datasets.
    pub eval_chunk: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 0.001,
            decay_factor: 0.99,
            decay_every: 100,
            max_epochs: 200,
            batch_size: 64,
            loss: LossWeights::default(),
            seed: 0,
            fusion: FusionVariant::V3,
            convergence: Convergence::default(),
            stop_on_convergence: true,
            stop_at_eval_accuracy: None,
            eval_chunk: 128,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::config("training.lr0", format!("must be > 0, got {}", self.lr0)));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(Error::config(
                "training.decay_factor",
                format!("must lie in (0, 1], got {}", self.decay_factor),
            ));
        }
        if self.decay_every == 0 {
            return Err(Error::config("training.decay_every", "must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("training.batch_size", "must be >= 1"));
        }
        if self.eval_chunk == 0 {
            return Err(Error::config("training.eval_chunk", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.convergence.threshold) || self.convergence.patience == 0 {
            return Err(Error::config(
                "training.convergence",
                "threshold must lie in [0, 1] and patience be >= 1",
            ));
        }
        self.loss.validate()
    }
}

/// Log of one training epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// Zero-based epoch index.
    pub epoch: usize,
    /// Mean objective over the epoch's mini-batches, weighted by batch size.
    pub loss: f64,
    pub classification_loss: f64,
    pub reconstruction_loss: f64,
    pub fairness_loss: Option<f64>,
    /// Metrics of the end-of-epoch model on the whole training set.
    pub train: Metrics,
    /// Metrics of the end-of-epoch model on the evaluation set.
    pub eval: Option<Metrics>,
    /// Learning rate after the epoch's last update.
    pub lr: f64,
    /// Updates performed so far.
    pub iterations: u64,
}

/// Learning rate right after a decay event.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrEvent {
    pub iteration: u64,
    pub lr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Run label such as `MARS-v2`.
    pub label: String,
    pub fusion: FusionVariant,
    pub channels: usize,
    pub classes: usize,
    pub train_samples: usize,
    pub eval_samples: usize,
    pub epochs: Vec<EpochRecord>,
    pub lr_events: Vec<LrEvent>,
    /// Final evaluation metrics; absent when no evaluation set was given.
    pub final_metrics: Option<Metrics>,
    pub confusion: Option<ConfusionMatrix>,
    /// Zero-based index of the first epoch of the converged plateau.
    pub epochs_to_convergence: Option<usize>,
    pub wall_clock_seconds: f64,
}

impl RunReport {
    pub fn train_accuracy_log(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train.top1).collect()
    }

    /// Every scalar except wall-clock time, in a fixed order, for
    /// reproducibility checks.
    pub fn scalars(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for e in &self.epochs {
            out.extend([
                e.loss,
                e.classification_loss,
                e.reconstruction_loss,
                e.fairness_loss.unwrap_or(0.0),
                e.lr,
                e.iterations as f64,
            ]);
            push_metrics(&mut out, &e.train);
            if let Some(m) = &e.eval {
                push_metrics(&mut out, m);
            }
        }
        for ev in &self.lr_events {
            out.extend([ev.iteration as f64, ev.lr]);
        }
        if let Some(m) = &self.final_metrics {
            push_metrics(&mut out, m);
        }
        if let Some(c) = &self.confusion {
            out.extend(c.rows().into_iter().flatten().map(|v| v as f64));
        }
        out.push(self.epochs_to_convergence.map_or(-1.0, |e| e as f64));
        out
    }
}

fn push_metrics(out: &mut Vec<f64>, m: &Metrics) {
    out.extend([m.accuracy, m.top1, m.precision, m.f1]);
}

/// First epoch `e` with `log[e..e + patience]` all at or above `threshold`.
pub fn detect_convergence(log: &[f64], threshold: f64, patience: usize) -> Option<usize> {
    if patience == 0 {
        return (!log.is_empty()).then_some(0);
    }
    let mut run = 0;
    for (i, &v) in log.iter().enumerate() {
        if v >= threshold {
            run += 1;
            if run == patience {
                return Some(i + 1 - patience);
            }
        } else {
            run = 0;
        }
    }
    None
}

/// Predictions and metrics of `model` on `data`.
pub fn evaluate(model: &MarsModel, data: &Dataset, chunk: usize) -> Result<(Metrics, ConfusionMatrix)> {
    if data.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty dataset"));
    }
    check_compatible(model, data)?;
    let windows: Vec<&[f64]> = data.samples.iter().map(|s| s.values.as_slice()).collect();
    let predicted = model.predict(&windows, chunk)?;
    let confusion = ConfusionMatrix::from_predictions(&data.labels(), &predicted, data.classes)?;
    Ok((confusion.metrics()?, confusion))
}

fn check_compatible(model: &MarsModel, data: &Dataset) -> Result<()> {
    if model.classes() != data.classes {
        return Err(Error::shape(format!(
            "model has {} classes, dataset has {}",
            model.classes(),
            data.classes
        )));
    }
    let spec = model.spec();
    if spec.channels != data.channels() || spec.window != data.window {
        return Err(Error::shape(format!(
            "model expects {}x{} windows, dataset holds {}x{}",
            spec.channels,
            spec.window,
            data.channels(),
            data.window
        )));
    }
    Ok(())
}

/// Trains `model` in place with mini-batch SGD on the composite objective.
pub fn train(
    model: &mut MarsModel,
    train_set: &Dataset,
    eval_set: Option<&Dataset>,
    config: &TrainConfig,
) -> Result<RunReport> {
    config.validate()?;
    check_compatible(model, train_set)?;
    if let Some(e) = eval_set {
        check_compatible(model, e)?;
    }
    if train_set.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let started = Instant::now();
    let mut schedule = StepDecay::new(config.lr0, config.decay_factor, config.decay_every);
    let mut lr_events = Vec::new();
    let mut epochs: Vec<EpochRecord> = Vec::new();
    let mut converged = None;
    for p in model.params_mut() {
        p.zero_grad();
    }

    for epoch in 0..config.max_epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed(config.seed, epoch));
        order.shuffle(&mut rng);

        let (mut loss, mut cls, mut rec, mut fair) = (0.0, 0.0, 0.0, 0.0);
        for batch in order.chunks(config.batch_size) {
            let (x, labels) = train_set.batch(batch)?;
            let out = model.accumulate_gradients(&x, &labels, &config.loss)?;
            if !out.total.is_finite() {
                return Err(Error::invalid(format!(
                    "objective became non-finite at iteration {}",
                    schedule.iteration() + 1
                )));
            }
            let w = batch.len() as f64;
            loss += w * out.total;
            cls += w * out.components.classification;
            rec += w * out.components.reconstruction;
            fair += w * out.components.fairness.unwrap_or(0.0);
            sgd_step(model.params_mut(), schedule.lr());
            let before = schedule.lr();
            let after = schedule.tick();
            if after != before {
                lr_events.push(LrEvent {
                    iteration: schedule.iteration(),
                    lr: after,
                });
            }
        }
        let n = train_set.len() as f64;
        let (train_metrics, _) = evaluate(model, train_set, config.eval_chunk)?;
        let eval_metrics = match eval_set {
            Some(e) if !e.is_empty() => Some(evaluate(model, e, config.eval_chunk)?.0),
            _ => None,
        };
        epochs.push(EpochRecord {
            epoch,
            loss: loss / n,
            classification_loss: cls / n,
            reconstruction_loss: rec / n,
            fairness_loss: (model.variant() == FusionVariant::V3).then_some(fair / n),
            train: train_metrics,
            eval: eval_metrics,
            lr: schedule.lr(),
            iterations: schedule.iteration(),
        });
        let log: Vec<f64> = epochs.iter().map(|e| e.train.top1).collect();
        converged = detect_convergence(&log, config.convergence.threshold, config.convergence.patience);
        if converged.is_some() && config.stop_on_convergence {
            break;
        }
        if let (Some(goal), Some(m)) = (config.stop_at_eval_accuracy, eval_metrics) {
            if m.top1 >= goal {
                break;
            }
        }
    }

    let (final_metrics, confusion) = match eval_set {
        Some(e) if !e.is_empty() => {
            let (m, c) = evaluate(model, e, config.eval_chunk)?;
            (Some(m), Some(c))
        }
        _ => (None, None),
    };
    Ok(RunReport {
        label: model.variant().label(),
        fusion: model.variant(),
        channels: train_set.channels(),
        classes: train_set.classes,
        train_samples: train_set.len(),
        eval_samples: eval_set.map_or(0, Dataset::len),
        epochs,
        lr_events,
        final_metrics,
        confusion,
        epochs_to_convergence: converged,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (epoch as u64).wrapping_add(0x5EED)
}

/// Builds the target model from a pretrained one: pathway parameters are
/// copied, the fusion head is Xavier-initialized for the target class count
/// and the variant given by `config.fusion`.
pub fn transfer_model(pretrained: &MarsModel, classes: usize, config: &TrainConfig) -> Result<MarsModel> {
    let mut model = MarsModel::new(
        pretrained.spec().clone(),
        config.fusion,
        classes,
        config.seed ^ 0x4845_4144,
    )?;
    model.copy_pathways_from(pretrained)?;
    Ok(model)
}

/// Knowledge transfer: [`transfer_model`] followed by [`train`] on the
/// target data. The learning rate schedule restarts from `lr0`.
pub fn transfer_finetune(
    pretrained: &MarsModel,
    train_set: &Dataset,
    eval_set: Option<&Dataset>,
    config: &TrainConfig,
) -> Result<(MarsModel, RunReport)> {
    let mut model = transfer_model(pretrained, train_set.classes, config)?;
    let report = train(&mut model, train_set, eval_set, config)?;
    Ok((model, report))
}
