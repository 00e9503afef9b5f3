//! Convolutional text classifier over trainable word embeddings.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::head::{ConvHead, HeadConfig, DEFAULT_FILTERS_PER_WIDTH, DEFAULT_FILTER_WIDTHS};
use crate::params::{init, ParamId, ParamStore};
use crate::preprocess::TokenizedExample;
use crate::scalar::Scalar;

pub const DEFAULT_EMBED_DIM: usize = 300;
pub const EMBEDDING_NAME: &str = "embeddings.weight";
pub const HEAD_PREFIX: &str = "head";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnnTextConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub filter_widths: Vec<usize>,
    pub filters_per_width: usize,
    #[serde(default)]
    pub dropout: f64,
}

impl CnnTextConfig {
    pub fn new(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            embed_dim: DEFAULT_EMBED_DIM,
            filter_widths: DEFAULT_FILTER_WIDTHS.to_vec(),
            filters_per_width: DEFAULT_FILTERS_PER_WIDTH,
            dropout: 0.0,
        }
    }

    /// Single-channel head over the embedding matrix.
    pub fn head(&self) -> HeadConfig {
        HeadConfig {
            filter_widths: self.filter_widths.clone(),
            filters_per_width: self.filters_per_width,
            in_channels: 1,
            embed_dim: self.embed_dim,
            dropout: self.dropout,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CnnText {
    config: CnnTextConfig,
    embeddings: ParamId,
    head: ConvHead,
}

impl CnnText {
    /// Embeddings ~ N(0, 1); head as in [`ConvHead::init`].
    pub fn init<T: Scalar, R: Rng>(store: &mut ParamStore<T>, config: &CnnTextConfig, rng: &mut R) -> Result<Self> {
        validate(config)?;
        let embeddings = store.insert(EMBEDDING_NAME, init::normal(rng, &[config.vocab_size, config.embed_dim], 1.0))?;
        let head = ConvHead::init(store, &config.head(), HEAD_PREFIX, rng)?;
        Ok(Self { config: config.clone(), embeddings, head })
    }

    pub fn bind<T: Scalar>(store: &ParamStore<T>, config: &CnnTextConfig) -> Result<Self> {
        validate(config)?;
        let embeddings = store.expect(EMBEDDING_NAME, &[config.vocab_size, config.embed_dim])?;
        let head = ConvHead::bind(store, &config.head(), HEAD_PREFIX)?;
        Ok(Self { config: config.clone(), embeddings, head })
    }

    pub fn config(&self) -> &CnnTextConfig {
        &self.config
    }

    pub fn logit<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        ex: &TokenizedExample,
        dropout_rng: Option<&mut dyn RngCore>,
    ) -> Result<Var> {
        check_ids(ex, self.config.vocab_size)?;
        let table = g.param(self.embeddings);
        let e = g.gather(table, &ex.positions());
        let x = g.reshape(e, &[1, ex.len(), self.config.embed_dim]);
        self.head.logit(g, x, dropout_rng)
    }
}

fn validate(config: &CnnTextConfig) -> Result<()> {
    if config.vocab_size == 0 || config.embed_dim == 0 {
        return Err(Error::Config("embedding dimensions must be positive".into()));
    }
    Ok(())
}

pub(crate) fn check_ids(ex: &TokenizedExample, vocab_size: usize) -> Result<()> {
    match ex.ids.iter().find(|&&i| i as usize >= vocab_size) {
        Some(bad) => Err(Error::Contract(format!("token id {bad} outside vocabulary of {vocab_size}"))),
        None => Ok(()),
    }
}
