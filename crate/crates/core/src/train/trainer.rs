use std::path::{Path, PathBuf};

use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tracing::info;

use super::{Adam, TextSource, TrainConfig};
use crate::error::{Error, Result};
use crate::eval::{evaluate, PoolSpec, QueryMode};
use crate::model::{
    save_checkpoint, ForwardMode, NullTextSource, Parameterized, TriModalExample, ViML,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub loss: f64,
    /// Fraction of the batch whose text was dropped.
    pub dropout_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochSnapshot {
    pub epoch: usize,
    pub mean_loss: f64,
    pub dropout_fraction: f64,
    /// Retrieval on a prefix of the training corpus.
    pub recall_at_10: f64,
    pub median_rank: f64,
    pub pool_size: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochSnapshot>,
}

impl TrainLog {
    pub fn initial_loss(&self) -> Option<f64> {
        self.steps.first().map(|s| s.loss)
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.steps.last().map(|s| s.loss)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Options that do not affect the trained parameters.
#[derive(Debug, Clone)]
pub struct TrainOptions {
    /// Intermediate checkpoints go to `<dir>/epoch-<k>`.
    pub checkpoint_dir: Option<PathBuf>,
    /// Number of corpus examples used for the per-epoch retrieval snapshot;
    /// 0 disables snapshots.
    pub snapshot_examples: usize,
    pub snapshot_pool: usize,
    /// Base text feature of the empty string, required when the model's null
    /// text is configured as that embedding.
    pub empty_text: Option<Array1<f32>>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            checkpoint_dir: None,
            snapshot_examples: 256,
            snapshot_pool: 100,
            empty_text: None,
        }
    }
}

pub fn train(
    config: &TrainConfig,
    corpus: &[TriModalExample<f32>],
) -> Result<(ViML<f32>, TrainLog)> {
    train_with(config, corpus, &TrainOptions::default())
}

/// Seeded mini-batch training. Each epoch visits the corpus in a fresh
/// permutation; a trailing batch with fewer than two examples is skipped.
pub fn train_with(
    config: &TrainConfig,
    corpus: &[TriModalExample<f32>],
    options: &TrainOptions,
) -> Result<(ViML<f32>, TrainLog)> {
    config.validate()?;
    if corpus.len() < 2 {
        return Err(Error::invalid("training needs at least two examples"));
    }
    let mut model = match config.model.null_text {
        NullTextSource::Zeros => ViML::new(config.model.clone(), config.seed)?,
        NullTextSource::EmptyStringEmbedding => {
            let empty = options.empty_text.clone().ok_or_else(|| {
                Error::invalid("null text is the empty-string embedding but none was supplied")
            })?;
            ViML::with_empty_string_null(config.model.clone(), config.seed, empty)?
        }
    };
    let stripped;
    let corpus =
        if config.text_source == TextSource::None && corpus.iter().any(|e| e.text.is_some()) {
            stripped = corpus
                .iter()
                .map(|e| TriModalExample {
                    text: None,
                    ..e.clone()
                })
                .collect::<Vec<_>>();
            &stripped[..]
        } else {
            corpus
        };

    let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed);
    order_rng.set_stream(1);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed);
    dropout_rng.set_stream(2);
    let mut optimizer = Adam::new(config.learning_rate, config.weight_decay);
    let mut log = TrainLog::default();
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut step = 0;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut order_rng);
        let (mut loss_sum, mut batches, mut dropped, mut seen) = (0.0, 0usize, 0usize, 0usize);
        for chunk in order.chunks(config.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            let batch: Vec<TriModalExample<f32>> =
                chunk.iter().map(|&i| corpus[i].clone()).collect();
            model.zero_grad();
            let stats = model.accumulate_gradients(&batch, ForwardMode::Train, &mut dropout_rng)?;
            if !stats.loss.is_finite() {
                return Err(Error::Divergence {
                    step,
                    loss: stats.loss,
                });
            }
            optimizer.step(&mut model);
            log.steps.push(StepRecord {
                step,
                epoch,
                loss: stats.loss,
                dropout_fraction: stats.dropped as f64 / stats.batch_size as f64,
            });
            loss_sum += stats.loss;
            batches += 1;
            dropped += stats.dropped;
            seen += stats.batch_size;
            step += 1;
        }

        let (recall_at_10, median_rank, pool_size) = snapshot(&model, corpus, options)?;
        let snap = EpochSnapshot {
            epoch,
            mean_loss: loss_sum / batches.max(1) as f64,
            dropout_fraction: dropped as f64 / seen.max(1) as f64,
            recall_at_10,
            median_rank,
            pool_size,
        };
        info!(
            epoch,
            loss = snap.mean_loss,
            r10 = snap.recall_at_10,
            mr = snap.median_rank,
            "epoch finished"
        );
        log.epochs.push(snap);

        if let Some(dir) = &options.checkpoint_dir {
            if config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0 {
                save_checkpoint(&model, &dir.join(format!("epoch-{epoch}")))?;
            }
        }
    }
    Ok((model, log))
}

fn snapshot(
    model: &ViML<f32>,
    corpus: &[TriModalExample<f32>],
    options: &TrainOptions,
) -> Result<(f64, f64, usize)> {
    let n = options.snapshot_examples.min(corpus.len());
    if n < 2 || options.snapshot_pool < 2 {
        return Ok((f64::NAN, f64::NAN, 0));
    }
    let pool = options.snapshot_pool.min(n);
    let mode = if model.config().use_video {
        QueryMode::VideoPlusText
    } else {
        QueryMode::TextOnly
    };
    let report = evaluate(model, &corpus[..n], &PoolSpec::new(pool, 0), mode)?;
    Ok((report.recall(10), report.median_rank, pool))
}
