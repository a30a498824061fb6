use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{ClassifierSpec, ModelParams, Prediction};
use crate::corpus::Report;
use crate::embed::{Embedder, EmbeddingMatrix};
use crate::metrics::{ConfusionMatrix, MetricsReport};
use crate::tokenizer::{tokenize, TokenizerConfig};
use crate::{rng_from_seed, sub_seed, Error, Result};

/// One embedded, labeled report.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub x: EmbeddingMatrix,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Stop after this many epochs without a validation-F1 improvement.
    pub early_stop_patience: Option<usize>,
    pub clip_norm: f64,
}

fn default_clip() -> f64 {
    5.0
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 10,
            batch_size: 16,
            seed: 0,
            early_stop_patience: None,
            clip_norm: default_clip(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be a finite non-negative number, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::Config("clip_norm must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss over the epoch's batches, before each update.
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub val_weighted_f1: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters after the epoch with the best validation weighted F1.
    pub params: ModelParams,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

/// Tokenizes and embeds labeled reports.
pub fn examples_from_reports(
    reports: &[Report],
    tokenizer: &TokenizerConfig,
    embedder: &Embedder,
) -> Result<Vec<Example>> {
    reports
        .iter()
        .map(|r| {
            let label = r
                .label
                .ok_or_else(|| Error::Validation(format!("report `{}` has no label", r.id)))?;
            let x = embedder.embed(&r.id, &tokenize(&r.text, tokenizer))?;
            Ok(Example {
                id: r.id.clone(),
                x,
                label,
            })
        })
        .collect()
}

/// Predictions for every example, in order.
pub fn predict_all(params: &ModelParams, examples: &[Example]) -> Result<Vec<Prediction>> {
    examples.iter().map(|e| params.forward(&e.x)).collect()
}

/// Validation metrics for a set of examples.
pub fn evaluate(params: &ModelParams, examples: &[Example]) -> Result<(f64, MetricsReport)> {
    let preds = predict_all(params, examples)?;
    let loss = examples
        .iter()
        .zip(&preds)
        .map(|(e, p)| -p.probabilities[e.label].max(super::model::PROB_FLOOR).ln())
        .sum::<f64>()
        / examples.len().max(1) as f64;
    let truths: Vec<usize> = examples.iter().map(|e| e.label).collect();
    let predicted: Vec<usize> = preds.iter().map(|p| p.predicted_class).collect();
    let cm = ConfusionMatrix::new(&truths, &predicted, params.spec().num_classes)?;
    Ok((loss, MetricsReport::from_confusion(&cm)))
}

pub(crate) fn check_finite(epoch: usize, loss: f64, values: &[f64]) -> Result<()> {
    if !loss.is_finite() || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { epoch, loss });
    }
    Ok(())
}

/// Mini-batch gradient descent with per-epoch reshuffling and
/// gradient-norm clipping. Initialization and shuffling derive from
/// `config.seed`; two runs with the same inputs are bit-identical.
pub fn train(
    spec: &ClassifierSpec,
    train_set: &[Example],
    val_set: &[Example],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    spec.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Validation("training and validation sets must be non-empty".into()));
    }
    for e in train_set.iter().chain(val_set) {
        if e.label >= spec.num_classes {
            return Err(Error::Validation(format!(
                "example `{}` has label {} outside 0..{}",
                e.id, e.label, spec.num_classes
            )));
        }
    }

    let mut params = ModelParams::init(spec, sub_seed(config.seed, 0))?;
    let mut rng = rng_from_seed(sub_seed(config.seed, 1));
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&EmbeddingMatrix, usize)> =
                chunk.iter().map(|&i| (&train_set[i].x, train_set[i].label)).collect();
            let (loss, mut grad) = params.gradient(&batch)?;
            check_finite(epoch, loss, &grad)?;
            loss_sum += loss * chunk.len() as f64;
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > config.clip_norm {
                let s = config.clip_norm / norm;
                grad.iter_mut().for_each(|g| *g *= s);
            }
            for (v, g) in params.values_mut().iter_mut().zip(&grad) {
                *v -= config.learning_rate * g;
            }
        }
        let train_loss = loss_sum / train_set.len() as f64;
        check_finite(epoch, train_loss, params.values())?;
        let (val_loss, report) = evaluate(&params, val_set)?;
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_accuracy: report.accuracy,
            val_weighted_f1: report.weighted_f1,
        });
        let improved = best.as_ref().is_none_or(|(f1, _, _)| report.weighted_f1 > *f1);
        if improved {
            best = Some((report.weighted_f1, epoch, params.clone()));
        }
        if let (Some(patience), Some((_, best_epoch, _))) = (config.early_stop_patience, &best) {
            if epoch - best_epoch >= patience {
                break;
            }
        }
    }
    let (_, best_epoch, params) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        params,
        best_epoch,
        history,
    })
}
