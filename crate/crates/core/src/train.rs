//! Mini-batch training with BCE loss and AdamW.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autograd::Tape;
use crate::error::{Error, Result};
use crate::model::{forward, leaves, Model, ModelConfig, ModelParams};
use crate::num::Scalar;
use crate::optim::{adamw_step, AdamState, AdamWConfig};
use crate::rng::SplitMix64;
use crate::sim::{sample_timeline, MatchRecord, Winner};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Probability at or above which player 1 is predicted to win.
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let o = AdamWConfig::default();
        Self {
            lr: o.lr,
            beta1: o.beta1,
            beta2: o.beta2,
            eps: o.eps,
            weight_decay: o.weight_decay,
            batch_size: 2,
            epochs: 10,
            seed: 0,
            threshold: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn optimizer(&self) -> AdamWConfig {
        AdamWConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer().validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        Ok(())
    }
}

/// One input timeline `[T, C, H, W]` and its label (1 for a player-1 win).
#[derive(Debug, Clone, PartialEq)]
pub struct Example<S> {
    pub x: Tensor<S>,
    pub label: S,
}

/// Label convention: player 1 → 1, player 2 → 0. Draws have no label.
pub fn label_of(winner: Winner) -> Option<bool> {
    winner.label()
}

/// Examples for `records` at progress `rho`. Draws are rejected.
pub fn examples<S: Scalar>(records: &[&MatchRecord], frames: usize, rho: f64) -> Result<Vec<Example<S>>> {
    records
        .par_iter()
        .map(|r| {
            let y = label_of(r.winner)
                .ok_or_else(|| Error::Contract(format!("match {} is a draw and has no label", r.id)))?;
            Ok(Example {
                x: sample_timeline(r, frames, rho)?,
                label: if y { S::one() } else { S::zero() },
            })
        })
        .collect()
}

/// Stack examples into a `[B, T, C, H, W]` batch.
pub fn stack<S: Scalar>(batch: &[&Example<S>]) -> Result<Tensor<S>> {
    let first = batch
        .first()
        .ok_or_else(|| Error::Contract("empty batch".into()))?;
    let mut shape = vec![batch.len()];
    shape.extend_from_slice(first.x.shape());
    let mut data = Vec::with_capacity(first.x.numel() * batch.len());
    for e in batch {
        if e.x.shape() != first.x.shape() {
            return Err(Error::dim("stack", first.x.shape(), e.x.shape()));
        }
        data.extend_from_slice(e.x.data());
    }
    Tensor::new(&shape, data)
}

const EVAL_CHUNK: usize = 8;

/// Player-1 win probabilities for every example, evaluated in parallel.
pub fn predict_all<S: Scalar>(cfg: &ModelConfig, params: &ModelParams<Tensor<S>>, set: &[Example<S>]) -> Result<Vec<S>> {
    let chunks: Vec<Vec<S>> = set
        .par_chunks(EVAL_CHUNK)
        .map(|c| {
            let refs: Vec<&Example<S>> = c.iter().collect();
            crate::model::predict(cfg, params, &stack(&refs)?)
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Mean BCE and accuracy of `probs` against `set`.
fn score<S: Scalar>(probs: &[S], set: &[Example<S>], threshold: f64) -> (f64, f64) {
    let clamp = crate::autograd::BCE_CLAMP;
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (p, e) in probs.iter().zip(set) {
        let q = p.as_f64().clamp(clamp, 1.0 - clamp);
        let y = e.label.as_f64();
        loss -= y * q.ln() + (1.0 - y) * (1.0 - q).ln();
        if (q >= threshold) == (y == 1.0) {
            correct += 1;
        }
    }
    let n = set.len().max(1) as f64;
    (loss / n, correct as f64 / n)
}

/// Loss and accuracy of the model over `set`.
pub fn evaluate_set<S: Scalar>(
    cfg: &ModelConfig,
    params: &ModelParams<Tensor<S>>,
    set: &[Example<S>],
    threshold: f64,
) -> Result<(f64, f64)> {
    let probs = predict_all(cfg, params, set)?;
    Ok(score(&probs, set, threshold))
}

/// One row of the training log. Row 0 is evaluated before any update;
/// later rows report the mean mini-batch loss seen during the epoch and
/// accuracies re-evaluated with the parameters at the end of the epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

pub const LOG_HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_acc";

impl LogRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{:.6},{:.6},{:.6},{:.6}",
            self.epoch, self.train_loss, self.train_acc, self.val_loss, self.val_acc
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<S> {
    pub log: Vec<LogRow>,
    /// Parameters with the highest validation accuracy (lower validation
    /// loss breaks ties, then the earlier epoch).
    pub best: ModelParams<Tensor<S>>,
    pub best_epoch: usize,
}

/// One gradient step on `batch`; returns the batch loss.
pub fn train_step<S: Scalar>(
    model: &mut Model<S>,
    batch: &[&Example<S>],
    state: &mut AdamState<S>,
    opt: &AdamWConfig,
) -> Result<f64> {
    let x = stack(batch)?;
    let labels: Vec<S> = batch.iter().map(|e| e.label).collect();
    let mut tape = Tape::new();
    let p = leaves(&mut tape, &model.params);
    let xv = tape.constant(x);
    let y = forward(&mut tape, &model.config, &p, xv)?;
    let loss = tape.bce(y, &labels)?;
    tape.backward(loss)?;
    let grads: Vec<Tensor<S>> = p.refs().into_iter().map(|&v| tape.grad(v)).collect();
    let mut targets = model.params.refs_mut();
    adamw_step(&mut targets, &grads, state, opt)?;
    Ok(tape.value(loss).item().as_f64())
}

/// Train `model` in place. Mini-batches are drawn from a per-epoch
/// shuffle seeded by `(cfg.seed, epoch)`. `on_epoch` sees each log row as
/// it is produced.
pub fn train<S: Scalar>(
    model: &mut Model<S>,
    train_set: &[Example<S>],
    val_set: &[Example<S>],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&LogRow),
) -> Result<TrainOutcome<S>> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Contract(format!(
            "training needs non-empty sets (train {}, validation {})",
            train_set.len(),
            val_set.len()
        )));
    }
    let opt = cfg.optimizer();
    let mut state = AdamState::new(model.params.refs());
    let mut log = Vec::with_capacity(cfg.epochs + 1);

    let (train_loss, train_acc) = evaluate_set(&model.config, &model.params, train_set, cfg.threshold)?;
    let (val_loss, val_acc) = evaluate_set(&model.config, &model.params, val_set, cfg.threshold)?;
    let row = LogRow {
        epoch: 0,
        train_loss,
        train_acc,
        val_loss,
        val_acc,
    };
    on_epoch(&row);
    log.push(row);
    let mut best = (model.params.clone(), 0usize, val_acc, val_loss);

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=cfg.epochs {
        SplitMix64::derive(cfg.seed, &[epoch as u64]).shuffle(&mut order);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Example<S>> = chunk.iter().map(|&i| &train_set[i]).collect();
            total += train_step(model, &batch, &mut state, &opt)? * batch.len() as f64;
        }
        let (_, train_acc) = evaluate_set(&model.config, &model.params, train_set, cfg.threshold)?;
        let (val_loss, val_acc) = evaluate_set(&model.config, &model.params, val_set, cfg.threshold)?;
        let row = LogRow {
            epoch,
            train_loss: total / train_set.len() as f64,
            train_acc,
            val_loss,
            val_acc,
        };
        log::info!("epoch {epoch}: {}", row.csv());
        on_epoch(&row);
        log.push(row);
        if val_acc > best.2 || (val_acc == best.2 && val_loss < best.3) {
            best = (model.params.clone(), epoch, val_acc, val_loss);
        }
    }
    Ok(TrainOutcome {
        log,
        best: best.0,
        best_epoch: best.1,
    })
}
