//! Mini-batch training with per-epoch dev evaluation and best-epoch
//! selection.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{DataSplit, Label};
use crate::error::{Error, Result};
use crate::head::DEFAULT_THRESHOLD;
use crate::metrics::{confusion, Confusion};
use crate::model::{ModelKind, NeuralClassifier};
use crate::optim::{AdamW, AdamWConfig};
use crate::params::Gradients;
use crate::preprocess::{Preprocessor, TokenizedExample};
use crate::scalar::Scalar;

pub const DEFAULT_EPOCHS: usize = 10;
pub const DEFAULT_BATCH_SIZE: usize = 32;
pub const DEFAULT_SEED: u64 = 42;
pub const ENCODER_LEARNING_RATE: f64 = 2e-5;
pub const EMBEDDING_LEARNING_RATE: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: AdamWConfig,
    /// Global gradient-norm bound; `None` disables clipping.
    pub clip_norm: Option<f64>,
    /// Linear warmup length in optimizer steps; 0 disables warmup.
    pub warmup_steps: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: DEFAULT_EPOCHS,
            learning_rate: ENCODER_LEARNING_RATE,
            batch_size: DEFAULT_BATCH_SIZE,
            seed: DEFAULT_SEED,
            optimizer: AdamWConfig::default(),
            clip_norm: Some(1.0),
            warmup_steps: 0,
        }
    }
}

impl TrainConfig {
    /// Defaults with the learning rate suited to `kind`.
    pub fn for_kind(kind: ModelKind) -> Self {
        let learning_rate = match kind {
            ModelKind::BertCnn | ModelKind::Bert => ENCODER_LEARNING_RATE,
            _ => EMBEDDING_LEARNING_RATE,
        };
        Self { learning_rate, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::Config(format!("clip norm must be positive, got {c}")));
            }
        }
        Ok(())
    }

    fn lr_at(&self, step: usize) -> f64 {
        if self.warmup_steps == 0 {
            self.learning_rate
        } else {
            self.learning_rate * ((step + 1) as f64 / self.warmup_steps as f64).min(1.0)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_macro_f1: f64,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_score: f64,
}

#[derive(Serialize)]
struct Summary {
    summary: bool,
    epochs: usize,
    best_epoch: usize,
    best_score: f64,
}

impl RunHistory {
    /// Records `rec`; the earliest epoch with the top score stays best.
    pub fn push(&mut self, rec: EpochRecord) -> bool {
        let improved = self.epochs.is_empty() || rec.dev_macro_f1 > self.best_score;
        if improved {
            self.best_epoch = rec.epoch;
            self.best_score = rec.dev_macro_f1;
        }
        self.epochs.push(rec);
        improved
    }

    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_loss).collect()
    }

    /// One JSON record per epoch followed by a summary record.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        let summary =
            Summary { summary: true, epochs: self.epochs.len(), best_epoch: self.best_epoch, best_score: self.best_score };
        out.push_str(&serde_json::to_string(&summary)?);
        out.push('\n');
        Ok(out)
    }
}

/// Seeded per-epoch visiting order over `n` training examples.
#[derive(Clone, Debug)]
pub struct EpochShuffler {
    rng: ChaCha8Rng,
    order: Vec<usize>,
}

impl EpochShuffler {
    pub fn new(n: usize, seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), order: (0..n).collect() }
    }

    /// Reshuffles and returns the order for the next epoch.
    pub fn next_epoch(&mut self) -> &[usize] {
        self.order.shuffle(&mut self.rng);
        &self.order
    }
}

/// Probabilities for every example, in input order.
pub fn probabilities<T: Scalar>(model: &NeuralClassifier<T>, examples: &[TokenizedExample]) -> Result<Vec<T>> {
    examples.par_iter().map(|ex| model.probability(ex)).collect()
}

/// Confusion counts against the examples' gold labels at threshold 0.5.
pub fn evaluate<T: Scalar>(model: &NeuralClassifier<T>, examples: &[TokenizedExample]) -> Result<Confusion> {
    let golds = gold_labels(examples)?;
    let threshold = T::lit(DEFAULT_THRESHOLD);
    let preds: Vec<Label> =
        probabilities(model, examples)?.into_iter().map(|p| Label::from_bit(p >= threshold)).collect();
    confusion(&preds, &golds)
}

fn gold_labels(examples: &[TokenizedExample]) -> Result<Vec<Label>> {
    examples
        .iter()
        .enumerate()
        .map(|(i, ex)| ex.label.ok_or_else(|| Error::Contract(format!("example {i} has no label"))))
        .collect()
}

/// Mean loss and averaged gradients over one batch. Examples run in
/// parallel; gradients are summed in batch order so the result does not
/// depend on thread scheduling.
pub fn batch_gradients<T: Scalar>(
    model: &NeuralClassifier<T>,
    batch: &[&TokenizedExample],
    dropout_seed: Option<(u64, u64)>,
) -> Result<(T, Gradients<T>)> {
    let per_example: Vec<(T, Gradients<T>)> = batch
        .par_iter()
        .enumerate()
        .map(|(i, ex)| match dropout_seed {
            Some((seed, stream)) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(stream.wrapping_add(i as u64));
                model.loss_and_gradients(ex, Some(&mut rng))
            }
            None => model.loss_and_gradients(ex, None),
        })
        .collect::<Result<_>>()?;
    let mut total = Gradients::new(model.store().len());
    let mut loss = T::zero();
    for (l, g) in &per_example {
        loss += *l;
        total.merge(g);
    }
    let inv = T::one() / T::lit(batch.len() as f64);
    total.scale(inv);
    Ok((loss * inv, total))
}

/// Trains for exactly `config.epochs` passes and returns the parameters of
/// the epoch with the best dev macro-F1. `on_epoch` sees each epoch's
/// record, the current model and whether that epoch is the new best.
pub fn train<T: Scalar>(
    model: NeuralClassifier<T>,
    train_set: &[TokenizedExample],
    dev_set: &[TokenizedExample],
    config: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord, &NeuralClassifier<T>, bool) -> Result<()>,
) -> Result<(NeuralClassifier<T>, RunHistory)> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    if dev_set.is_empty() {
        return Err(Error::Config("development set is empty".into()));
    }
    gold_labels(train_set)?;
    gold_labels(dev_set)?;

    let mut model = model;
    let mut opt = AdamW::new(model.store(), config.optimizer.clone());
    let mut shuffler = EpochShuffler::new(train_set.len(), config.seed);
    let dropout_seed = config.seed.wrapping_add(1);
    let mut history = RunHistory::default();
    let mut best = model.clone();
    let mut step = 0usize;

    for epoch in 0..config.epochs {
        let start = Instant::now();
        let order = shuffler.next_epoch().to_vec();
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&TokenizedExample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let stream = ((epoch as u64) << 32) | (b * config.batch_size) as u64;
            let (loss, mut grads) = batch_gradients(&model, &batch, Some((dropout_seed, stream)))?;
            if !loss.is_finite() {
                return Err(Error::numeric(format!("training loss at epoch {epoch}, batch {b}")));
            }
            if let Some(c) = config.clip_norm {
                grads.clip_global_norm(T::lit(c));
            }
            opt.step(model.store_mut(), &grads, config.lr_at(step))?;
            step += 1;
            loss_sum += loss.as_f64() * batch.len() as f64;
        }
        let dev_macro_f1 = evaluate(&model, dev_set)?.macro_f1();
        let rec = EpochRecord {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            dev_macro_f1,
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        log::info!("epoch {epoch}: loss {:.6}, dev macro-F1 {:.4}", rec.train_loss, rec.dev_macro_f1);
        let improved = history.push(rec.clone());
        if improved {
            best = model.clone();
        }
        on_epoch(&rec, &model, improved)?;
    }
    Ok((best, history))
}

/// Tokenizes both halves of `split` and trains on them.
pub fn train_split<T: Scalar>(
    model: NeuralClassifier<T>,
    split: &DataSplit,
    preprocessor: &Preprocessor,
    config: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord, &NeuralClassifier<T>, bool) -> Result<()>,
) -> Result<(NeuralClassifier<T>, RunHistory)> {
    let tokenize = |xs: &[crate::corpus::LabeledTweet]| -> Vec<TokenizedExample> {
        xs.par_iter().map(|t| preprocessor.example(&t.text, Some(t.label))).collect()
    };
    let (tr, dv) = (tokenize(&split.train), tokenize(&split.dev));
    train(model, &tr, &dv, config, on_epoch)
}
