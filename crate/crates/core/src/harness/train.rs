use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_class_coverage, evaluate, Example, TrainConfig};
use crate::bcresnet::{features_to_tensor, BcResNet};
use crate::error::{Error, Result};
use crate::grad::{batch_cross_entropy, zero_grad, Checkpoint, Mode, Module, Sgd};

/// Keeps the shuffling stream apart from the initialization stream.
const SHUFFLE_STREAM: u64 = 0x5348_5546;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogKind {
    Step,
    Epoch,
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub kind: LogKind,
    /// Fractional epoch at which the step's learning rate was taken; the
    /// completed epoch count for epoch records.
    pub epoch: f64,
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
    pub val_acc: Option<f64>,
}

pub struct TrainOutcome {
    pub model: BcResNet<f32>,
    pub best: Checkpoint,
    pub best_epoch: usize,
    pub best_val_acc: Option<f64>,
    pub log: Vec<LogRecord>,
}

impl TrainOutcome {
    pub fn epoch_losses(&self) -> Vec<f64> {
        self.log
            .iter()
            .filter(|r| r.kind == LogKind::Epoch)
            .map(|r| r.loss)
            .collect()
    }
}

pub fn write_log(path: &Path, log: &[LogRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in log {
        serde_json::to_writer(&mut w, r).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Validation accuracy averaged over the distinct SNRs present.
fn validation_accuracy(model: &BcResNet<f32>, val: &[Example]) -> Result<Option<f64>> {
    if val.is_empty() {
        return Ok(None);
    }
    let mut snrs: Vec<f64> = val.iter().map(|e| e.snr_db).collect();
    snrs.sort_by(f64::total_cmp);
    snrs.dedup();
    let table = evaluate(model, val, &snrs)?;
    let per_snr: Vec<f64> = snrs.iter().filter_map(|&s| table.snr_accuracy(s)).collect();
    Ok(Some(per_snr.iter().sum::<f64>() / per_snr.len() as f64))
}

/// Trains one model from `seed` with shuffled mini-batches and a per-step
/// learning rate. Keeps the final model and the best validation checkpoint
/// (the final one when there is no validation data).
pub fn train(config: &TrainConfig, seed: u64, train_set: &[Example], val_set: &[Example]) -> Result<TrainOutcome> {
    config.validate()?;
    check_class_coverage(train_set, config.classes)?;
    let channels = config.mics.len();
    for e in train_set.iter().chain(val_set) {
        if e.features.channels() != channels {
            return Err(Error::ShapeMismatch(format!(
                "example has {} channels, config uses {channels}",
                e.features.channels()
            )));
        }
    }
    let mut model = BcResNet::<f32>::new(config.model_config(), seed)?;
    let mut opt = Sgd::new(config.momentum, config.weight_decay);
    let schedule = config.schedule();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let steps_per_epoch = train_set.len().div_ceil(config.batch_size);
    let mut log = Vec::new();
    let mut best: Option<(f64, usize, Checkpoint)> = None;
    let mut step = 0;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (i, batch) in order.chunks(config.batch_size).enumerate() {
            let at = epoch as f64 + i as f64 / steps_per_epoch as f64;
            let lr = schedule.at(at)?;
            let maps: Vec<_> = batch.iter().map(|&k| &train_set[k].features).collect();
            let labels: Vec<usize> = batch.iter().map(|&k| train_set[k].label).collect();
            let x = features_to_tensor::<f32>(&maps)?;
            let logits = model.forward(&x, Mode::Train)?;
            let (loss, grad) = batch_cross_entropy(&logits, &labels)?;
            if !loss.is_finite() {
                return Err(Error::Divergence);
            }
            zero_grad(&mut model);
            model.backward(&grad)?;
            opt.step(&mut model, lr)?;
            loss_sum += loss * batch.len() as f64;
            log.push(LogRecord {
                kind: LogKind::Step,
                epoch: at,
                step,
                lr,
                loss,
                val_acc: None,
            });
            step += 1;
        }
        let val_acc = validation_accuracy(&model, val_set)?;
        log.push(LogRecord {
            kind: LogKind::Epoch,
            epoch: (epoch + 1) as f64,
            step,
            lr: schedule.at((epoch + 1) as f64)?,
            loss: loss_sum / train_set.len() as f64,
            val_acc,
        });
        if let Some(acc) = val_acc {
            if best.as_ref().is_none_or(|(b, _, _)| acc > *b) {
                best = Some((acc, epoch + 1, Checkpoint::capture(&model)));
            }
        }
    }
    let (best_val_acc, best_epoch, best) = match best {
        Some((acc, e, ck)) => (Some(acc), e, ck),
        None => (None, config.epochs, Checkpoint::capture(&model)),
    };
    Ok(TrainOutcome {
        model,
        best,
        best_epoch,
        best_val_acc,
        log,
    })
}

/// Top-1 accuracy in percent on `examples`, all SNRs pooled.
pub fn accuracy(model: &BcResNet<f32>, examples: &[Example]) -> Result<f64> {
    let preds = super::predict_all(model, examples)?;
    let correct = preds.iter().zip(examples).filter(|(p, e)| **p == e.label).count();
    Ok(100.0 * correct as f64 / examples.len().max(1) as f64)
}
