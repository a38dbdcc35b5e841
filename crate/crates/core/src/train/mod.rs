//! Mini-batch training with seeded shuffling and early stopping on
//! validation accuracy.

mod history;

pub use history::{
    checkpoint, history_csv, read_history, sig6, write_history, EpochRecord, TrainHistory, CHECKPOINT_HISTORY,
    CHECKPOINT_MODEL, HISTORY_HEADER,
};

use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::FeatureSet;
use crate::error::{Error, Result};
use crate::fsutil::derive_seed;
use crate::label::N_CLASSES;
use crate::model::{batch_tensor, predict, ModelState};
use crate::nncore::{softmax_xent, AdamConfig, AdamState, Mode, Optimizer, SgdMomentum};
use crate::scalar::{FlushToZero, Scalar};

const SHUFFLE_TAG: u64 = 0x5348_5546;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub class_weighting: bool,
    pub optimizer: OptimizerKind,
    /// Momentum for [`OptimizerKind::Sgd`].
    pub momentum: f64,
    /// Rewritten after every epoch when set.
    #[serde(skip)]
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch_size: 32,
            max_epochs: 100,
            patience: 10,
            seed: 0,
            class_weighting: false,
            optimizer: OptimizerKind::Adam,
            momentum: 0.9,
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::InvalidArgument("batch_size must be at least 2".into()));
        }
        if self.patience < 1 {
            return Err(Error::InvalidArgument("patience must be at least 1".into()));
        }
        if self.max_epochs < 1 {
            return Err(Error::InvalidArgument("max_epochs must be at least 1".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {} is invalid", self.lr)));
        }
        Ok(())
    }

    fn optimizer<T: Scalar>(&self) -> Optimizer<T> {
        match self.optimizer {
            OptimizerKind::Adam => Optimizer::Adam(AdamState::new(AdamConfig {
                lr: self.lr,
                ..AdamConfig::default()
            })),
            OptimizerKind::Sgd => Optimizer::Sgd(SgdMomentum::new(self.lr, self.momentum)),
        }
    }
}

/// Shuffled index batches for one epoch. A trailing batch of one sample is
/// folded into its predecessor so batch norm always sees at least two.
pub fn make_batches(n: usize, batch_size: usize, seed: u64, epoch: usize) -> Result<Vec<Vec<usize>>> {
    if n == 0 {
        return Err(Error::Dataset("cannot batch an empty dataset".into()));
    }
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, &[SHUFFLE_TAG, epoch as u64])));
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    if batches.len() > 1 && batches.last().map_or(false, |b| b.len() < 2) {
        let tail = batches.pop().expect("nonempty");
        batches.last_mut().expect("nonempty").extend(tail);
    }
    Ok(batches)
}

/// Per-class weights `N / (K · n_c)`, so every class contributes equally.
pub fn inverse_frequency_weights(counts: [usize; N_CLASSES]) -> [f64; N_CLASSES] {
    let total: usize = counts.iter().sum();
    counts.map(|c| if c == 0 { 0.0 } else { total as f64 / (N_CLASSES as f64 * c as f64) })
}

/// Mean cross-entropy and accuracy of infer-mode predictions.
pub fn evaluate_loss<T: Scalar>(model: &ModelState<T>, set: &FeatureSet<T>, batch: usize) -> Result<(f64, f64)> {
    let all: Vec<usize> = (0..set.len()).collect();
    let (mut loss, mut correct) = (0.0, 0usize);
    for chunk in all.chunks(batch.max(1)) {
        let out = model.forward(&batch_tensor(set, chunk)?, Mode::Infer)?;
        let labels: Vec<usize> = chunk.iter().map(|&i| set.labels[i].index()).collect();
        let xent = softmax_xent(&out.logits, &labels, None)?;
        loss += xent.loss.as_f64() * chunk.len() as f64;
        correct += count_correct(out.probs.data(), &labels);
    }
    let n = set.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

fn count_correct<T: Scalar>(probs: &[T], labels: &[usize]) -> usize {
    probs
        .chunks_exact(N_CLASSES)
        .zip(labels)
        .filter(|(row, &l)| predict(row) == l)
        .count()
}

fn check_sets<T: Scalar>(model: &ModelState<T>, train: &FeatureSet<T>, val: &FeatureSet<T>) -> Result<()> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::Dataset("training and validation sets must be nonempty".into()));
    }
    let counts = train.class_counts();
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Dataset(format!(
            "training set has no {} segments",
            crate::label::ClassLabel::from_index(c)?
        )));
    }
    for set in [train, val] {
        if set.dims != model.config.input_shape {
            return Err(Error::Shape(format!(
                "features {:?} do not match model input {:?}",
                set.dims, model.config.input_shape
            )));
        }
    }
    Ok(())
}

/// Runs one epoch of updates; returns (mean loss, accuracy) over the epoch's
/// train-mode forward passes.
fn run_epoch<T: Scalar>(
    model: &mut ModelState<T>,
    optimizer: &mut Optimizer<T>,
    train: &FeatureSet<T>,
    cfg: &TrainConfig,
    class_weights: Option<[f64; N_CLASSES]>,
    epoch: usize,
) -> Result<(f64, f64)> {
    let (mut loss_sum, mut correct) = (0.0, 0usize);
    for (b, batch) in make_batches(train.len(), cfg.batch_size, cfg.seed, epoch)?.iter().enumerate() {
        let x = batch_tensor(train, batch)?;
        let labels: Vec<usize> = batch.iter().map(|&i| train.labels[i].index()).collect();
        let weights: Option<Vec<T>> = class_weights.map(|w| labels.iter().map(|&l| T::lit(w[l])).collect());
        let (out, cache) = model.forward_train(&x)?;
        let xent = softmax_xent(&out.logits, &labels, weights.as_deref())?;
        let grads = model.backward(&cache, &xent.grad_logits)?;
        let grads_finite = grads.slices().iter().all(|g| g.iter().all(|v| v.is_finite()));
        if !xent.loss.is_finite() || !grads_finite {
            let records = batch
                .iter()
                .copied()
                .filter(|&i| train.record(i).iter().any(|v| !v.is_finite()))
                .collect::<Vec<_>>();
            return Err(Error::NonFiniteLoss {
                epoch,
                batch: b,
                records: if records.is_empty() { batch.clone() } else { records },
            });
        }
        optimizer.step(&mut model.params_mut(), &grads.slices())?;
        model.update_running(&cache);
        loss_sum += xent.loss.as_f64() * batch.len() as f64;
        correct += count_correct(out.probs.data(), &labels);
    }
    let n = train.len() as f64;
    Ok((loss_sum / n, correct as f64 / n))
}

/// Trains `model` and returns the state with the best validation accuracy
/// (earliest on ties) together with the per-epoch history.
///
/// The first epoch always becomes the incumbent; patience counts epochs since
/// the last strict improvement. If no epoch beats the untrained state on
/// validation accuracy, the untrained state is returned.
pub fn train<T: Scalar>(
    model: ModelState<T>,
    train_set: &FeatureSet<T>,
    val_set: &FeatureSet<T>,
    cfg: &TrainConfig,
) -> Result<(ModelState<T>, TrainHistory)> {
    train_with(model, train_set, val_set, cfg, |_| {})
}

/// [`train`] with a callback after each epoch.
pub fn train_with<T: Scalar>(
    mut model: ModelState<T>,
    train_set: &FeatureSet<T>,
    val_set: &FeatureSet<T>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(ModelState<T>, TrainHistory)> {
    cfg.validate()?;
    check_sets(&model, train_set, val_set)?;
    let _ftz = FlushToZero::enable();
    let started = Instant::now();
    let class_weights = cfg.class_weighting.then(|| inverse_frequency_weights(train_set.class_counts()));
    let mut optimizer = cfg.optimizer::<T>();

    let initial = model.clone();
    let (_, initial_val_acc) = evaluate_loss(&model, val_set, cfg.batch_size)?;
    let mut best: Option<(usize, f64, ModelState<T>)> = None;
    let mut records = Vec::new();
    let mut since_best = 0;

    for epoch in 1..=cfg.max_epochs {
        let (train_loss, train_acc) = run_epoch(&mut model, &mut optimizer, train_set, cfg, class_weights, epoch)?;
        let (val_loss, val_acc) = evaluate_loss(&model, val_set, cfg.batch_size)?;
        let record = EpochRecord {
            epoch,
            train_loss,
            train_acc,
            val_loss,
            val_acc,
        };
        records.push(record);
        on_epoch(&record);
        if best.as_ref().map_or(true, |(_, acc, _)| val_acc > *acc) {
            best = Some((epoch, val_acc, model.clone()));
            since_best = 0;
        } else {
            since_best += 1;
        }
        if let Some(dir) = &cfg.checkpoint_dir {
            checkpoint(&model, &records, dir, epoch)?;
        }
        if since_best >= cfg.patience {
            break;
        }
    }

    let (best_epoch, best_acc, best_state) = best.expect("at least one epoch");
    let (best_epoch, state) = if initial_val_acc > best_acc {
        (0, initial)
    } else {
        (best_epoch, best_state)
    };
    let history = TrainHistory {
        records,
        best_epoch,
        initial_val_acc,
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    Ok((state, history))
}
