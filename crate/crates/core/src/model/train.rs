//! Mini-batch training with early stopping on validation loss.

use std::time::{SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EncodedInstance, Herman, HermanConfig};
use crate::error::{Error, Result};
use crate::nn::{clip_global_norm, Adam, Gradients, Graph, ParamStore};

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// Restart (1-based) the epoch belongs to.
    pub run: usize,
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Seconds since the Unix epoch when the epoch finished.
    pub timestamp: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub log: Vec<EpochRecord>,
    /// Restart (1-based) whose parameters were kept.
    pub best_run: usize,
    /// Epoch (1-based) whose parameters were kept.
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

/// Mean combined loss over `instances` with the model's current parameters.
pub fn evaluate_loss(model: &Herman, instances: &[EncodedInstance]) -> Result<f64> {
    if instances.is_empty() {
        return Err(Error::data("cannot evaluate on an empty split"));
    }
    let mut total = 0.0;
    for inst in instances {
        let l = model.loss(inst)?;
        if !l.is_finite() {
            return Err(Error::numeric(format!("non-finite validation loss on {}", inst.id)));
        }
        total += l;
    }
    Ok(total / instances.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Progress {
    Improved,
    Stale,
    Stop,
}

/// Stops once validation loss has failed to improve for `patience`
/// consecutive epochs; a patience of 0 behaves like 1.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self { patience, best: None, stale: 0 }
    }

    pub fn observe(&mut self, val_loss: f64) -> Progress {
        if self.best.is_none_or(|b| val_loss < b) {
            self.best = Some(val_loss);
            self.stale = 0;
            return Progress::Improved;
        }
        self.stale += 1;
        if self.stale >= self.patience.max(1) {
            Progress::Stop
        } else {
            Progress::Stale
        }
    }
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Train `model` in place. The parameters of the epoch with the lowest
/// validation loss are restored at the end. `on_epoch` sees every log
/// record as soon as it is produced.
pub fn train(
    model: &mut Herman,
    train: &[EncodedInstance],
    val: &[EncodedInstance],
    on_epoch: impl FnMut(&EpochRecord) -> Result<()>,
) -> Result<TrainOutcome> {
    train_run(model, 1, train, val, on_epoch)
}

/// Trains `config.restarts` models and keeps the one with the lowest
/// validation loss. Run `r` (0-based) is built by `init` from seed
/// `config.seed + r`; the instances must be encoded with the vocabulary
/// `init` uses.
pub fn train_restarts(
    config: &HermanConfig,
    mut init: impl FnMut(HermanConfig) -> Result<Herman>,
    train: &[EncodedInstance],
    val: &[EncodedInstance],
    mut on_epoch: impl FnMut(&EpochRecord) -> Result<()>,
) -> Result<(Herman, TrainOutcome)> {
    config.validate()?;
    let mut log = Vec::new();
    let mut best: Option<(Herman, TrainOutcome)> = None;
    for run in 1..=config.restarts {
        let seed = config.seed.wrapping_add(run as u64 - 1);
        let mut model = init(HermanConfig { seed, ..config.clone() })?;
        let outcome = train_run(&mut model, run, train, val, &mut on_epoch)?;
        log.extend(outcome.log.iter().cloned());
        if best.as_ref().is_none_or(|(_, b)| outcome.best_val_loss < b.best_val_loss) {
            best = Some((model, outcome));
        }
    }
    let (model, outcome) = best.expect("at least one restart");
    Ok((model, TrainOutcome { log, ..outcome }))
}

fn train_run(
    model: &mut Herman,
    run: usize,
    train: &[EncodedInstance],
    val: &[EncodedInstance],
    mut on_epoch: impl FnMut(&EpochRecord) -> Result<()>,
) -> Result<TrainOutcome> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::data("training and validation splits must be non-empty"));
    }
    let config = model.config.clone();
    config.validate()?;
    let adam = Adam::new(config.lr);
    let mut grads = Gradients::zeros_like(&model.store);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5e_ed0f_5eed);

    let mut log = Vec::new();
    let mut stopping = EarlyStopping::new(config.patience);
    let mut best: Option<(f64, usize, ParamStore)> = None;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.zero();
            let weight = 1.0 / batch.len() as f64;
            for &i in batch {
                let inst = &train[i];
                let mut g = Graph::new(&model.store);
                let out = model.net.forward(&mut g, &inst.article, &inst.summary, &inst.m)?;
                let loss = model.net.loss(&mut g, &out, &inst.y, inst.z)?;
                let value = g.scalar(loss);
                if !value.is_finite() {
                    return Err(Error::numeric(format!(
                        "loss became {value} on instance {} in epoch {epoch}",
                        inst.id
                    )));
                }
                epoch_loss += value;
                g.backward_scaled(loss, weight, &mut grads);
            }
            clip_global_norm(&mut grads, config.clip_norm);
            adam.step(&mut model.store, &grads)?;
        }
        let train_loss = epoch_loss / train.len() as f64;
        let val_loss = evaluate_loss(model, val)?;
        let record = EpochRecord { run, epoch, train_loss, val_loss, timestamp: now() };
        on_epoch(&record)?;
        log.push(record);

        match stopping.observe(val_loss) {
            Progress::Improved => best = Some((val_loss, epoch, model.store.clone())),
            Progress::Stale => {}
            Progress::Stop => break,
        }
    }

    let (best_val_loss, best_epoch, store) = best.expect("at least one epoch ran");
    model.store = store;
    Ok(TrainOutcome { log, best_run: run, best_epoch, best_val_loss })
}
