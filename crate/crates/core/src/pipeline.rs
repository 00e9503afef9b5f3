//! Text-in, score-out wrapper around any trained classifier, with a
//! self-describing checkpoint directory.
//!
//! Layout: `config.json` (model kind, language, tokenization settings and
//! the network config), plus either `vocab.txt` + the weight archive for
//! neural models or `tfidf.json` for the SVM.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::archive;
use crate::baselines::TfidfModel;
use crate::corpus::{Label, LabeledTweet};
use crate::error::{Error, Result};
use crate::head::DEFAULT_THRESHOLD;
use crate::metrics::{confusion, Confusion};
use crate::model::{ModelKind, NeuralClassifier, NeuralConfig};
use crate::preprocess::{Language, Preprocessor, Vocabulary};
use crate::scalar::Scalar;

pub const VOCAB_FILE: &str = "vocab.txt";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointConfig {
    pub model: ModelKind,
    pub language: Language,
    pub max_len: usize,
    pub lowercase: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NeuralConfig>,
}

#[derive(Clone, Debug)]
pub enum Classifier<T> {
    Neural { preprocessor: Preprocessor, model: NeuralClassifier<T> },
    Svm { model: TfidfModel },
}

#[derive(Clone, Debug)]
pub struct Pipeline<T> {
    pub classifier: Classifier<T>,
    /// Seed of the run that produced the model; recorded in reports.
    pub seed: u64,
}

impl<T: Scalar> Pipeline<T> {
    pub fn neural(preprocessor: Preprocessor, model: NeuralClassifier<T>) -> Result<Self> {
        if preprocessor.vocab.len() != model.config().vocab_size() {
            return Err(Error::Config(format!(
                "vocabulary has {} tokens but the model expects {}",
                preprocessor.vocab.len(),
                model.config().vocab_size()
            )));
        }
        Ok(Self { classifier: Classifier::Neural { preprocessor, model }, seed: 0 })
    }

    pub fn svm(model: TfidfModel) -> Self {
        Self { classifier: Classifier::Svm { model }, seed: 0 }
    }

    pub fn kind(&self) -> ModelKind {
        match &self.classifier {
            Classifier::Neural { model, .. } => model.kind(),
            Classifier::Svm { .. } => ModelKind::SvmTfidf,
        }
    }

    pub fn language(&self) -> Language {
        match &self.classifier {
            Classifier::Neural { preprocessor, .. } => preprocessor.language,
            Classifier::Svm { model } => model.language,
        }
    }

    /// Offensive-class scores in `[0, 1]`, in input order.
    pub fn scores(&self, texts: &[&str]) -> Result<Vec<f64>> {
        match &self.classifier {
            Classifier::Neural { preprocessor, model } => texts
                .par_iter()
                .map(|t| model.probability(&preprocessor.example(t, None)).map(|p| p.as_f64()))
                .collect(),
            Classifier::Svm { model } => Ok(texts.par_iter().map(|t| model.score(t)).collect()),
        }
    }

    /// Threshold 0.5; ties go to Offensive.
    pub fn labels(scores: &[f64]) -> Vec<Label> {
        scores.iter().map(|&p| Label::from_bit(p >= DEFAULT_THRESHOLD)).collect()
    }

    pub fn evaluate(&self, data: &[LabeledTweet]) -> Result<Confusion> {
        let texts: Vec<&str> = data.iter().map(|t| t.text.as_str()).collect();
        let preds = Self::labels(&self.scores(&texts)?);
        let golds: Vec<Label> = data.iter().map(|t| t.label).collect();
        confusion(&preds, &golds)
    }

    pub fn checkpoint_config(&self) -> CheckpointConfig {
        match &self.classifier {
            Classifier::Neural { preprocessor, model } => CheckpointConfig {
                model: model.kind(),
                language: preprocessor.language,
                max_len: preprocessor.max_len,
                lowercase: preprocessor.lowercase,
                seed: self.seed,
                network: Some(model.config().clone()),
            },
            Classifier::Svm { model } => CheckpointConfig {
                model: ModelKind::SvmTfidf,
                language: model.language,
                max_len: 0,
                lowercase: true,
                seed: self.seed,
                network: None,
            },
        }
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        match &self.classifier {
            Classifier::Neural { preprocessor, model } => {
                preprocessor.vocab.save(dir.join(VOCAB_FILE))?;
                model.save_weights(dir)?;
            }
            Classifier::Svm { model } => model.save(dir)?,
        }
        archive::write_json(dir.join(archive::CONFIG_FILE), &self.checkpoint_config())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(Error::NotFound(dir.to_path_buf()));
        }
        let cfg: CheckpointConfig = archive::read_json(dir.join(archive::CONFIG_FILE))?;
        if cfg.model == ModelKind::SvmTfidf {
            let mut p = Self::svm(TfidfModel::load(dir)?);
            p.seed = cfg.seed;
            return Ok(p);
        }
        let network = cfg
            .network
            .ok_or_else(|| Error::Config(format!("checkpoint for `{}` lacks a network config", cfg.model)))?;
        if network.kind() != cfg.model {
            return Err(Error::Config(format!(
                "checkpoint declares `{}` but its network config is `{}`",
                cfg.model,
                network.kind()
            )));
        }
        let vocab = Vocabulary::load(dir.join(VOCAB_FILE))?;
        let mut preprocessor = Preprocessor::new(cfg.language, vocab, cfg.max_len);
        preprocessor.lowercase = cfg.lowercase;
        let model = NeuralClassifier::load_weights(network, dir)?;
        let mut p = Self::neural(preprocessor, model)?;
        p.seed = cfg.seed;
        Ok(p)
    }
}
