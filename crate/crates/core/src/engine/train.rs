use std::borrow::Cow;

use crate::cells::BackwardOptions;
use crate::engine::model::{GradStore, Model};
use crate::engine::optim::{clip_global_norm, OptimizerConfig, OptimizerState};
use crate::engine::unroll::{accumulate_batch, argmax, sequence_loss, unroll_forward, Sequence};
use crate::error::{Error, Result};
use crate::numkit::{Rng, Scalar};

/// Indexed collection of sequences. Lets large corpora build sequences on
/// demand instead of holding every encoded window in memory.
pub trait SequenceSource<T: Clone> {
    fn len(&self) -> usize;
    fn get(&self, idx: usize) -> Cow<'_, Sequence<T>>;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<T: Clone> SequenceSource<T> for [Sequence<T>] {
    fn len(&self) -> usize {
        <[Sequence<T>]>::len(self)
    }
    fn get(&self, idx: usize) -> Cow<'_, Sequence<T>> {
        Cow::Borrowed(&self[idx])
    }
}

impl<T: Clone> SequenceSource<T> for Vec<Sequence<T>> {
    fn len(&self) -> usize {
        <[Sequence<T>]>::len(self)
    }
    fn get(&self, idx: usize) -> Cow<'_, Sequence<T>> {
        Cow::Borrowed(&self[idx])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    /// Global-norm clipping threshold; `None` disables clipping.
    pub clip: Option<f64>,
    /// Stop after the first epoch whose test sequence accuracy is 1.
    pub stop_on_converge: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 16,
            optimizer: OptimizerConfig::adam(1e-3),
            clip: Some(5.0),
            stop_on_converge: false,
        }
    }
}

/// Held-out metrics. A sequence counts as correct only if every target is.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalStats {
    pub loss: f64,
    pub seq_accuracy: f64,
    pub step_accuracy: f64,
    pub sequences: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochReport {
    /// 0 is the evaluation before any training.
    pub epoch: usize,
    pub train_loss: Option<f64>,
    pub test: EvalStats,
}

pub fn evaluate<T: Scalar, S: SequenceSource<T> + ?Sized>(
    model: &Model<T>,
    data: &S,
) -> Result<EvalStats> {
    if data.is_empty() {
        return Err(Error::Argument("cannot evaluate on an empty set".into()));
    }
    let mut loss = 0.0;
    let mut seq_ok = 0usize;
    let mut steps = 0usize;
    let mut steps_ok = 0usize;
    for i in 0..data.len() {
        let s = data.get(i);
        let traj = unroll_forward(model, &s.inputs)?;
        loss += sequence_loss(&traj, &s.targets)?.0.to_f64_lossless();
        let mut all = true;
        for (logits, &y) in traj.logits.iter().zip(&s.targets) {
            steps += 1;
            if argmax(logits) == y {
                steps_ok += 1;
            } else {
                all = false;
            }
        }
        seq_ok += usize::from(all);
    }
    let n = data.len() as f64;
    Ok(EvalStats {
        loss: loss / n,
        seq_accuracy: seq_ok as f64 / n,
        step_accuracy: steps_ok as f64 / steps as f64,
        sequences: data.len(),
    })
}

/// Mini-batch trainer. Deterministic given the model, data and seed.
#[derive(Clone, Debug)]
pub struct Trainer<T> {
    pub model: Model<T>,
    pub opt: OptimizerState<T>,
    pub rng: Rng,
    pub cfg: TrainConfig,
    pub epoch: usize,
    /// Updates skipped because the gradient was not finite.
    pub nonfinite_updates: usize,
    grads: GradStore<T>,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(model: Model<T>, cfg: TrainConfig, rng: Rng) -> Result<Self> {
        model.check()?;
        if cfg.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if let Some(c) = cfg.clip {
            if c <= 0.0 {
                return Err(Error::Config("clip norm must be positive".into()));
            }
        }
        let opt = OptimizerState::new(cfg.optimizer, &model.params);
        let grads = GradStore::zeros_for(&model);
        Ok(Trainer {
            model,
            opt,
            rng,
            cfg,
            epoch: 0,
            nonfinite_updates: 0,
            grads,
        })
    }

    /// One update on an explicit batch; returns the batch loss.
    pub fn step(&mut self, batch: &[Sequence<T>]) -> Result<f64> {
        self.grads.zero();
        let loss = accumulate_batch(&self.model, batch, &mut self.grads, BackwardOptions::default())?;
        self.apply()?;
        Ok(loss.to_f64_lossless())
    }

    fn apply(&mut self) -> Result<()> {
        if !self.grads.is_finite() {
            self.nonfinite_updates += 1;
            return Ok(());
        }
        if let Some(c) = self.cfg.clip {
            clip_global_norm(&mut self.grads, T::of(c));
        }
        self.opt.step(&mut self.model.params, &self.grads);
        Ok(())
    }

    /// One shuffled pass over `data`; returns the mean batch loss.
    pub fn train_epoch<S: SequenceSource<T> + ?Sized>(&mut self, data: &S) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::Argument("empty training set".into()));
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        self.rng.shuffle(&mut order);
        let mut total = 0.0;
        let mut batches = 0usize;
        let mut batch: Vec<Sequence<T>> = Vec::with_capacity(self.cfg.batch_size);
        for chunk in order.chunks(self.cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| data.get(i).into_owned()));
            self.grads.zero();
            let loss =
                accumulate_batch(&self.model, &batch, &mut self.grads, BackwardOptions::default())?;
            self.apply()?;
            total += loss.to_f64_lossless();
            batches += 1;
        }
        self.epoch += 1;
        Ok(total / batches as f64)
    }

    /// Evaluates at epoch 0, then trains for `cfg.epochs` epochs, evaluating
    /// after each. `on_epoch` sees every report as soon as it exists.
    pub fn run<A, B, F>(&mut self, train: &A, test: &B, mut on_epoch: F) -> Result<Vec<EpochReport>>
    where
        A: SequenceSource<T> + ?Sized,
        B: SequenceSource<T> + ?Sized,
        F: FnMut(&EpochReport, &Trainer<T>) -> Result<()>,
    {
        let mut reports = Vec::with_capacity(self.cfg.epochs + 1);
        if self.epoch == 0 {
            let r = EpochReport {
                epoch: 0,
                train_loss: None,
                test: evaluate(&self.model, test)?,
            };
            on_epoch(&r, self)?;
            reports.push(r);
        }
        while self.epoch < self.cfg.epochs {
            let train_loss = self.train_epoch(train)?;
            let r = EpochReport {
                epoch: self.epoch,
                train_loss: Some(train_loss),
                test: evaluate(&self.model, test)?,
            };
            on_epoch(&r, self)?;
            reports.push(r);
            if self.cfg.stop_on_converge && r.test.seq_accuracy >= 1.0 {
                break;
            }
        }
        Ok(reports)
    }
}
