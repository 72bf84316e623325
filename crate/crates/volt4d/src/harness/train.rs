//! The training loop: seeded shuffling, mini-batch gradient accumulation
//! across a worker pool, Adam updates, per-epoch validation, and
//! checkpointing.

use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::iter::{IntoParallelRefIterator, ParallelIterator};

use crate::error::{Error, Result};
use crate::layers::adam::{AdamHyper, AdamState};
use crate::layers::checkpoint::{save_checkpoint, CheckpointMeta};
use crate::rng::{self, Domain};
use crate::synthgen::Sample;
use crate::tensor::Tensor;
use crate::zoo::{ArchId, Model, ModelConfig, MotionPrediction};

use super::loss::mse_loss;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub arch: ArchId,
    pub model: ModelConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamHyper,
    pub master_seed: u64,
    /// Stop after this many epochs without a validation improvement.
    pub patience: Option<usize>,
    /// Where to write `best.ckpt` and `final.ckpt`; `None` trains in memory
    /// only.
    pub out_dir: Option<PathBuf>,
    /// Print one progress line per epoch to stderr.
    pub verbose: bool,
}

impl TrainConfig {
    pub fn new(arch: ArchId) -> Self {
        TrainConfig {
            arch,
            model: ModelConfig::desk(),
            epochs: 400,
            batch_size: 8,
            adam: AdamHyper::default(),
            master_seed: 1,
            patience: None,
            out_dir: None,
            verbose: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        self.model.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// Mean per-sample training loss over the epoch.
    pub train_loss: f64,
    /// Validation MAE over all nine components, mm; NaN when no validation
    /// set was given.
    pub val_mae: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    /// Epoch index with the lowest validation MAE, if any was recorded.
    pub fn best_val_epoch(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, e) in self.epochs.iter().enumerate() {
            if e.val_mae.is_finite() && best.map_or(true, |(_, v)| e.val_mae < v) {
                best = Some((i, e.val_mae));
            }
        }
        best.map(|(i, _)| i)
    }
}

/// Mean over samples of the mean absolute error over all nine components.
fn combined_mae(preds: &[MotionPrediction], targets: &[&Sample]) -> f64 {
    let mut total = 0.0;
    for (p, s) in preds.iter().zip(targets) {
        let p = p.to_flat();
        let t = s.labels.to_flat();
        total += (0..9).map(|i| (p[i] - t[i]).abs()).sum::<f64>() / 9.0;
    }
    total / preds.len() as f64
}

/// Train `model` in place. Batches are processed by a worker pool but
/// gradients are reduced in a fixed order, so results are independent of
/// thread count. Returns one history record per completed epoch.
pub fn train(
    model: &mut Model,
    train_set: &[Sample],
    val_set: &[Sample],
    cfg: &TrainConfig,
) -> Result<History> {
    cfg.validate()?;
    if model.arch != cfg.arch {
        return Err(Error::Config(format!(
            "config is for {} but the model is {}",
            cfg.arch, model.arch
        )));
    }
    if train_set.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let mut adam = AdamState::new(&model.store, cfg.adam);
    let mut history = History::default();
    let mut loss_tail: Vec<f64> = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut epochs_since_best = 0usize;

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        let mut shuffle_rng = rng::stream(cfg.master_seed, Domain::Shuffle, epoch as u64);
        order.shuffle(&mut shuffle_rng);

        let mut epoch_loss_sum = 0.0;
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let results: Vec<(f64, Vec<Tensor>)> = chunk
                .par_iter()
                .map(|&i| -> Result<(f64, Vec<Tensor>)> {
                    let sample = &train_set[i];
                    let mut tape = crate::layers::tape::Tape::new();
                    let out = model.forward_tape(&mut tape, &sample.sequence)?;
                    let pred = MotionPrediction::from_flat(tape.value(out).data())?;
                    let (loss, grad) = mse_loss(&pred, &sample.labels);
                    let seed = Tensor::from_vec(&[9], grad.to_vec())?;
                    let mut buffers = model.store.grad_buffers();
                    tape.backward_into(model.store.values(), &mut buffers, out, &seed)?;
                    Ok((loss, buffers))
                })
                .collect::<Result<Vec<_>>>()?;

            let mut accumulated = model.store.grad_buffers();
            let mut batch_loss_sum = 0.0;
            for (loss, buffers) in &results {
                batch_loss_sum += loss;
                for (acc, buf) in accumulated.iter_mut().zip(buffers) {
                    for (a, b) in acc.data_mut().iter_mut().zip(buf.data()) {
                        *a += b;
                    }
                }
            }
            let inv = 1.0 / chunk.len() as f64;
            for acc in &mut accumulated {
                for a in acc.data_mut() {
                    *a *= inv;
                }
            }

            let batch_loss = batch_loss_sum * inv;
            loss_tail.push(batch_loss);
            if loss_tail.len() > 5 {
                loss_tail.remove(0);
            }
            if !batch_loss.is_finite() {
                return Err(Error::NanLoss {
                    epoch,
                    batch: batch_idx,
                    tail: loss_tail,
                });
            }
            epoch_loss_sum += batch_loss_sum;

            model.store.zero_grad();
            model.store.accumulate_buffers(&accumulated)?;
            adam.step(&mut model.store)?;
        }

        let val_mae = if val_set.is_empty() {
            f64::NAN
        } else {
            let preds: Vec<MotionPrediction> = val_set
                .par_iter()
                .map(|s| model.forward(&s.sequence))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&Sample> = val_set.iter().collect();
            combined_mae(&preds, &refs)
        };

        let record = EpochRecord {
            train_loss: epoch_loss_sum / train_set.len() as f64,
            val_mae,
            wall_seconds: started.elapsed().as_secs_f64(),
        };
        if cfg.verbose {
            eprintln!(
                "epoch {:>4}/{} train_loss={:.6} val_mae={:.6} ({:.1}s)",
                epoch + 1,
                cfg.epochs,
                record.train_loss,
                record.val_mae,
                record.wall_seconds
            );
        }
        history.epochs.push(record);

        if val_mae.is_finite() && val_mae < best_val {
            best_val = val_mae;
            epochs_since_best = 0;
            if let Some(dir) = &cfg.out_dir {
                save_checkpoint(
                    &dir.join("best.ckpt"),
                    &checkpoint_meta(model, &adam, epoch, val_mae),
                    &model.store,
                )?;
            }
        } else {
            epochs_since_best += 1;
            if let Some(patience) = cfg.patience {
                if epochs_since_best >= patience {
                    break;
                }
            }
        }
    }

    if let Some(dir) = &cfg.out_dir {
        let last = history.epochs.len() - 1;
        let val = history.epochs[last].val_mae;
        save_checkpoint(
            &dir.join("final.ckpt"),
            &checkpoint_meta(model, &adam, last, val),
            &model.store,
        )?;
    }
    Ok(history)
}

fn checkpoint_meta(model: &Model, adam: &AdamState, epoch: usize, val_mae: f64) -> CheckpointMeta {
    CheckpointMeta {
        arch: model.arch.name().to_string(),
        seed: model.seed,
        step_count: adam.step_count(),
        extra: vec![
            ("epoch".to_string(), epoch.to_string()),
            ("val_mae".to_string(), format!("{val_mae}")),
        ],
    }
}
