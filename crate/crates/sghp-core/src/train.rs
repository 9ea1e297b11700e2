//! Deterministic mini-batch training with early stopping.
//!
//! Batches are sums of independent per-sequence losses; every batch takes one
//! Adam step on the summed (and norm-clipped) gradients. Shuffling, training
//! noise, and evaluation noise all derive from the configured master seed, so
//! `(data, config, seed)` fully determines the returned parameters.

use alloc::vec::Vec;

use crate::adam::{adam_step, AdamConfig, AdamState, ShapeMismatch};
use crate::data::Dataset;
use crate::model::{ModelConfig, ModelError, SghpModel};
use crate::rng::{self, Stream};
use crate::tape::Gradients;

/// Wall-clock source for epoch timing; core code never reads an ambient clock.
pub trait Clock {
    /// Monotonic seconds from an arbitrary origin.
    fn now(&mut self) -> f64;
}

/// No-op clock: every epoch reports zero seconds.
pub struct NullClock;

impl Clock for NullClock {
    fn now(&mut self) -> f64 {
        0.0
    }
}

/// Training hyperparameters. Model shape flags ride along in `model`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Consecutive epochs without validation improvement tolerated before
    /// stopping; 0 stops at the first non-improving epoch.
    pub patience: usize,
    /// Global gradient-norm clip; guards the exp(p - d) regime early in
    /// training. Non-positive disables clipping.
    pub clip_norm: f64,
    /// Master seed for initialization, shuffling, and noise.
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(model: ModelConfig) -> Self {
        TrainConfig {
            model,
            adam: AdamConfig::default(),
            batch_size: 32,
            max_epochs: 200,
            patience: 10,
            clip_norm: 5.0,
            seed: 0,
        }
    }
}

/// Per-epoch losses and the selected epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    /// Mean per-sequence training loss, one entry per epoch run.
    pub train_loss: Vec<f64>,
    /// Mean per-sequence validation loss, same length.
    pub val_loss: Vec<f64>,
    /// Wall-clock seconds per epoch (zeros under [`NullClock`]).
    pub epoch_seconds: Vec<f64>,
    /// 1-based index of the epoch whose parameters were returned.
    pub best_epoch: usize,
    pub param_count: usize,
}

impl TrainReport {
    pub fn epochs_run(&self) -> usize {
        self.train_loss.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainError {
    /// Train/validation datasets disagree with the model on K or C.
    ConfigMismatch { what: &'static str },
    /// No training sequence has the minimum usable length (2).
    AllSequencesTooShort,
    /// Validation split has no usable sequence to early-stop on.
    EmptyValidation,
    /// A batch produced a non-finite loss.
    NonFiniteLoss { epoch: usize, batch: usize },
    /// Parameters left the finite range after an epoch.
    NonFiniteParams { epoch: usize },
    Model(ModelError),
    Adam(ShapeMismatch),
}

impl core::fmt::Display for TrainError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TrainError::ConfigMismatch { what } => write!(f, "configuration mismatch: {what}"),
            TrainError::AllSequencesTooShort => {
                write!(f, "sequence too short: no training sequence has length >= 2")
            }
            TrainError::EmptyValidation => write!(f, "validation split has no usable sequences"),
            TrainError::NonFiniteLoss { epoch, batch } => {
                write!(f, "non-finite loss in epoch {epoch}, batch {batch}")
            }
            TrainError::NonFiniteParams { epoch } => {
                write!(f, "non-finite parameters after epoch {epoch}")
            }
            TrainError::Model(e) => write!(f, "{e}"),
            TrainError::Adam(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for TrainError {}

impl From<ModelError> for TrainError {
    fn from(e: ModelError) -> Self {
        TrainError::Model(e)
    }
}

impl From<ShapeMismatch> for TrainError {
    fn from(e: ShapeMismatch) -> Self {
        TrainError::Adam(e)
    }
}

fn check_dataset(ds: &Dataset, cfg: &ModelConfig, what: &'static str) -> Result<(), TrainError> {
    if ds.num_types() != cfg.num_types || ds.covariate_dim() != cfg.covariate_dim {
        return Err(TrainError::ConfigMismatch { what });
    }
    Ok(())
}

/// Indices of sequences long enough to carry a next-event target.
fn usable_indices(ds: &Dataset) -> Vec<usize> {
    ds.sequences()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.len() >= 2)
        .map(|(i, _)| i)
        .collect()
}

/// Trains a fresh model, returning the parameters of the best validation
/// epoch. Sequences shorter than 2 events carry no target and are skipped.
pub fn train(
    train_ds: &Dataset,
    val_ds: &Dataset,
    cfg: &TrainConfig,
    clock: &mut dyn Clock,
) -> Result<(SghpModel, TrainReport), TrainError> {
    check_dataset(train_ds, &cfg.model, "training split K/C")?;
    check_dataset(val_ds, &cfg.model, "validation split K/C")?;
    let train_idx = usable_indices(train_ds);
    if train_idx.is_empty() {
        return Err(TrainError::AllSequencesTooShort);
    }
    if usable_indices(val_ds).is_empty() {
        return Err(TrainError::EmptyValidation);
    }

    let mut model = SghpModel::init(cfg.model, cfg.seed)?;
    let mut state = AdamState::new(cfg.adam, model.params());
    let eval_seed = rng::derive(cfg.seed, &[rng::tag::EVAL_NOISE]);

    let mut report = TrainReport {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        epoch_seconds: Vec::new(),
        best_epoch: 0,
        param_count: model.param_count(),
    };
    let mut best_val = f64::INFINITY;
    let mut best_params = model.params().clone();
    let mut since_best = 0usize;

    for epoch in 1..=cfg.max_epochs {
        let start = clock.now();
        let mut order = train_idx.clone();
        Stream::derived(cfg.seed, &[rng::tag::SHUFFLE, epoch as u64]).shuffle(&mut order);

        let mut epoch_loss = 0.0;
        for (batch_no, batch) in order.chunks(cfg.batch_size.max(1)).enumerate() {
            let mut acc = Gradients::zeros_like(model.params());
            for &idx in batch {
                let mut noise =
                    Stream::derived(cfg.seed, &[rng::tag::TRAIN_NOISE, epoch as u64, idx as u64]);
                let (loss, grads) =
                    model.loss_and_grads(&train_ds.sequences()[idx], &mut noise)?;
                if !loss.is_finite() || !grads.all_finite() {
                    return Err(TrainError::NonFiniteLoss {
                        epoch,
                        batch: batch_no,
                    });
                }
                epoch_loss += loss;
                acc.accumulate(&grads);
            }
            if cfg.clip_norm > 0.0 {
                let norm = acc.global_norm();
                if norm > cfg.clip_norm {
                    acc.scale(cfg.clip_norm / norm);
                }
            }
            adam_step(model.params_mut(), &acc, &mut state)?;
        }
        if !model.params().all_finite() {
            return Err(TrainError::NonFiniteParams { epoch });
        }

        report.train_loss.push(epoch_loss / train_idx.len() as f64);
        let val = evaluate_loss(val_ds, &model, eval_seed)?;
        report.val_loss.push(val);
        report.epoch_seconds.push(clock.now() - start);

        if val < best_val {
            best_val = val;
            best_params = model.params().clone();
            report.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > cfg.patience {
                break;
            }
        }
    }

    let best_model = SghpModel::from_parts(cfg.model, best_params)?;
    Ok((best_model, report))
}

/// Mean per-sequence loss over the usable sequences of a dataset.
///
/// Every sequence is scored with an identical noise stream derived from
/// `eval_seed`, so the value is deterministic and invariant under duplicating
/// sequences. Parameters are not touched.
pub fn evaluate_loss(ds: &Dataset, model: &SghpModel, eval_seed: u64) -> Result<f64, TrainError> {
    check_dataset(ds, model.config(), "evaluation dataset K/C")?;
    let idx = usable_indices(ds);
    if idx.is_empty() {
        return Err(TrainError::AllSequencesTooShort);
    }
    let base = rng::derive(eval_seed, &[rng::tag::EVAL_NOISE]);
    let mut total = 0.0;
    for &i in &idx {
        let mut noise = Stream::new(base);
        total += model.loss_value(&ds.sequences()[i], &mut noise)?;
    }
    Ok(total / idx.len() as f64)
}
