//! Effective training configuration: flags, then the config file, then
//! built-in defaults.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use bertcnn::baselines::{TermWeighting, DEFAULT_FEATURES};
use bertcnn::corpus::{DEFAULT_SPLIT_RATIO, DEFAULT_SPLIT_SEED};
use bertcnn::preprocess::DEFAULT_MAX_LEN;
use bertcnn::{Error, Language, ModelKind, Result, TrainConfig};

use crate::TrainArgs;

pub const DEFAULT_VOCAB_SIZE: usize = 30_000;

#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub model: ModelKind,
    pub language: Language,
    pub train: PathBuf,
    pub dev: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub encoder: Option<PathBuf>,
    pub tiny_encoder: bool,
    pub out: PathBuf,
    pub name: String,
    pub seed: u64,
    pub ratio: f64,
    pub max_len: usize,
    pub lowercase: bool,
    pub vocab_size: usize,
    pub training: TrainConfig,
    pub dropout: f64,
    pub embed_dim: Option<usize>,
    pub hidden: Option<usize>,
    pub layers: Option<usize>,
    pub filters: Option<usize>,
    pub features: usize,
    pub weighting: TermWeighting,
    pub svm_c: f64,
    pub save_all_epochs: bool,
}

/// `key = value` lines; `#` starts a comment. Dashes in keys read as
/// underscores.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("config line {}: expected `key = value`", i + 1)))?;
        let key = k.trim().replace('-', "_");
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("config line {}: duplicate key `{key}`", i + 1)));
        }
    }
    Ok(map)
}

struct Layer {
    file: BTreeMap<String, String>,
}

impl Layer {
    fn take<T: FromStr>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        let from_file = self.file.remove(key);
        if flag.is_some() {
            return Ok(flag);
        }
        from_file
            .map(|v| v.parse::<T>().map_err(|e| Error::Config(format!("config key `{key}`: {e}"))))
            .transpose()
    }

    fn flag(&mut self, key: &str, flag: bool) -> Result<bool> {
        Ok(self.take(key, flag.then_some(true))?.unwrap_or(false))
    }
}

fn required<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("missing required option `--{flag}`")))
}

impl RunConfig {
    pub fn resolve(args: &TrainArgs) -> Result<Self> {
        let file = match &args.config {
            Some(p) => parse_config_file(&fs::read_to_string(p).map_err(|e| io_error(p, e))?)?,
            None => BTreeMap::new(),
        };
        let mut l = Layer { file };

        let model: ModelKind = required(l.take("model", args.model.clone())?, "model")?
            .parse()
            .map_err(Error::Config)?;
        let language: Language = required(l.take("lang", args.lang.clone())?, "lang")?
            .parse()
            .map_err(Error::Config)?;
        let train = required(l.take("train", args.train.clone())?, "train")?;
        let dev = l.take("dev", args.dev.clone())?;
        let vocab = l.take("vocab", args.vocab.clone())?;
        let encoder = l.take("encoder", args.encoder.clone())?;
        let tiny_encoder = l.flag("tiny_encoder", args.tiny_encoder)?;
        let seed = l.take("seed", args.seed)?.unwrap_or(DEFAULT_SPLIT_SEED);
        let out = l.take("out", args.out.clone())?.unwrap_or_else(|| PathBuf::from("runs"));
        let name = l
            .take("name", args.name.clone())?
            .unwrap_or_else(|| format!("{}-{}-seed{seed}", model, language.code()));

        let mut training = TrainConfig::for_kind(model);
        training.seed = seed;
        if let Some(v) = l.take("epochs", args.epochs)? {
            training.epochs = v;
        }
        if let Some(v) = l.take("lr", args.lr)? {
            training.learning_rate = v;
        }
        if let Some(v) = l.take("batch_size", args.batch_size)? {
            training.batch_size = v;
        }
        if let Some(v) = l.take("weight_decay", args.weight_decay)? {
            training.optimizer.weight_decay = v;
        }
        if let Some(v) = l.take("clip_norm", args.clip_norm)? {
            training.clip_norm = (v > 0.0).then_some(v);
        }
        if let Some(v) = l.take("warmup_steps", args.warmup_steps)? {
            training.warmup_steps = v;
        }

        let weighting = match l.take("weighting", args.weighting.clone())?.as_deref() {
            None | Some("tf_idf") | Some("tfidf") => TermWeighting::TfIdf,
            Some("counts") => TermWeighting::Counts,
            Some(other) => return Err(Error::Config(format!("unknown weighting `{other}` (expected tf_idf or counts)"))),
        };

        let cfg = Self {
            model,
            language,
            train,
            dev,
            vocab,
            encoder,
            tiny_encoder,
            out,
            name,
            seed,
            ratio: l.take("ratio", args.ratio)?.unwrap_or(DEFAULT_SPLIT_RATIO),
            max_len: l.take("max_len", args.max_len)?.unwrap_or(DEFAULT_MAX_LEN),
            lowercase: l.flag("lowercase", args.lowercase)?,
            vocab_size: l.take("vocab_size", args.vocab_size)?.unwrap_or(DEFAULT_VOCAB_SIZE),
            training,
            dropout: l.take("dropout", args.dropout)?.unwrap_or(0.0),
            embed_dim: l.take("embed_dim", args.embed_dim)?,
            hidden: l.take("hidden", args.hidden)?,
            layers: l.take("layers", args.layers)?,
            filters: l.take("filters", args.filters)?,
            features: l.take("features", args.features)?.unwrap_or(DEFAULT_FEATURES),
            weighting,
            svm_c: l.take("svm_c", args.svm_c)?.unwrap_or(1.0),
            save_all_epochs: l.flag("save_all_epochs", args.save_all_epochs)?,
        };
        if let Some(key) = l.file.keys().next() {
            return Err(Error::Config(format!("unknown config key `{key}`")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let m = self.model;
        if m == ModelKind::SvmTfidf {
            if self.encoder.is_some() {
                return Err(Error::Config("`--model svm_tfidf` cannot be combined with `--encoder`".into()));
            }
            if self.tiny_encoder {
                return Err(Error::Config("`--model svm_tfidf` cannot be combined with `--tiny-encoder`".into()));
            }
        } else if m.uses_encoder() {
            match (self.encoder.is_some(), self.tiny_encoder) {
                (false, false) => {
                    return Err(Error::Config(format!("`--model {m}` requires `--encoder` or `--tiny-encoder`")));
                }
                (true, true) => {
                    return Err(Error::Config("`--encoder` and `--tiny-encoder` are mutually exclusive".into()));
                }
                _ => {}
            }
        } else if self.encoder.is_some() || self.tiny_encoder {
            return Err(Error::Config(format!(
                "`--model {m}` uses its own embeddings and cannot be combined with `--encoder`/`--tiny-encoder`"
            )));
        }
        if self.max_len < 3 {
            return Err(Error::Config(format!("max length must be at least 3, got {}", self.max_len)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        if self.features == 0 {
            return Err(Error::Config("feature count must be positive".into()));
        }
        self.training.validate()
    }

    pub fn run_dir(&self) -> PathBuf {
        self.out.join(&self.name)
    }
}

pub fn io_error(path: &Path, e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::NotFound {
        Error::NotFound(path.to_path_buf())
    } else {
        Error::Io { path: path.to_path_buf(), source: e }
    }
}
