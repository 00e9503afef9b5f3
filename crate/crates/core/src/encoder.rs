//! Transformer encoder producing the last-four-layer embedding stack.
//!
//! The same architecture backs both encoder sources: a seeded, randomly
//! initialized reference model for desk-scale runs, and externally supplied
//! checkpoints in the weight-archive layout. Parameter names follow the
//! usual BERT state-dict naming without the model prefix, so converted
//! checkpoints bind without renaming.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::archive;
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::params::{init, ParamId, ParamStore};
use crate::preprocess::TokenizedExample;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Number of top layers exposed as channels.
pub const STACK_CHANNELS: usize = 4;

const INIT_STD: f64 = 0.02;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub hidden: usize,
    pub layers: usize,
    pub heads: usize,
    pub max_position: usize,
    pub intermediate: usize,
    #[serde(default = "default_type_vocab")]
    pub type_vocab_size: usize,
    #[serde(default = "default_eps")]
    pub layer_norm_eps: f64,
}

fn default_type_vocab() -> usize {
    2
}

fn default_eps() -> f64 {
    1e-12
}

impl EncoderConfig {
    /// Base size: 12 layers, hidden 768, 12 heads.
    pub fn base(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            hidden: 768,
            layers: 12,
            heads: 12,
            max_position: 512,
            intermediate: 3072,
            type_vocab_size: 2,
            layer_norm_eps: 1e-12,
        }
    }

    /// Desk-scale reference: 4 layers, hidden 16, 2 heads.
    pub fn tiny(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            hidden: 16,
            layers: 4,
            heads: 2,
            max_position: 64,
            intermediate: 64,
            type_vocab_size: 2,
            layer_norm_eps: 1e-12,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers < STACK_CHANNELS {
            return Err(Error::Config(format!("encoder needs at least {STACK_CHANNELS} layers, got {}", self.layers)));
        }
        if self.heads == 0 || self.hidden % self.heads != 0 {
            return Err(Error::Config(format!("hidden {} not divisible by heads {}", self.hidden, self.heads)));
        }
        if self.vocab_size == 0 || self.max_position == 0 || self.intermediate == 0 || self.type_vocab_size == 0 {
            return Err(Error::Config("encoder dimensions must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct LayerParams {
    query: (ParamId, ParamId),
    key: (ParamId, ParamId),
    value: (ParamId, ParamId),
    attn_out: (ParamId, ParamId),
    attn_norm: (ParamId, ParamId),
    inter: (ParamId, ParamId),
    out: (ParamId, ParamId),
    out_norm: (ParamId, ParamId),
}

#[derive(Clone, Debug)]
pub struct TransformerEncoder {
    config: EncoderConfig,
    word: ParamId,
    position: ParamId,
    token_type: ParamId,
    emb_norm: (ParamId, ParamId),
    layers: Vec<LayerParams>,
}

/// One example's last four hidden layers, `[4, L, H]`, in ascending layer
/// order, plus the attention mask.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingStack<T> {
    pub values: Tensor<T>,
    pub mask: Vec<bool>,
}

impl<T: Scalar> EmbeddingStack<T> {
    pub fn seq_len(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn hidden(&self) -> usize {
        self.values.shape()[2]
    }

    /// `[L, H]` slab for one channel.
    pub fn channel(&self, c: usize) -> &[T] {
        let n = self.seq_len() * self.hidden();
        &self.values.data()[c * n..(c + 1) * n]
    }
}

enum Build<'a, T, R> {
    Init(&'a mut ParamStore<T>, &'a mut R),
    Bind(&'a ParamStore<T>),
}

impl<T: Scalar, R: Rng> Build<'_, T, R> {
    fn tensor(&mut self, name: String, shape: &[usize], kind: InitKind) -> Result<ParamId> {
        match self {
            Build::Init(store, rng) => {
                let t = match kind {
                    InitKind::Normal => init::normal(*rng, shape, INIT_STD),
                    InitKind::Zeros => Tensor::zeros(shape),
                    InitKind::Ones => Tensor::full(shape, T::one()),
                };
                store.insert(name, t)
            }
            Build::Bind(store) => store.expect(&name, shape),
        }
    }

    fn linear(&mut self, prefix: &str, out_dim: usize, in_dim: usize) -> Result<(ParamId, ParamId)> {
        Ok((
            self.tensor(format!("{prefix}.weight"), &[out_dim, in_dim], InitKind::Normal)?,
            self.tensor(format!("{prefix}.bias"), &[out_dim], InitKind::Zeros)?,
        ))
    }

    fn norm(&mut self, prefix: &str, dim: usize) -> Result<(ParamId, ParamId)> {
        Ok((
            self.tensor(format!("{prefix}.weight"), &[dim], InitKind::Ones)?,
            self.tensor(format!("{prefix}.bias"), &[dim], InitKind::Zeros)?,
        ))
    }
}

#[derive(Clone, Copy)]
enum InitKind {
    Normal,
    Zeros,
    Ones,
}

impl TransformerEncoder {
    fn build<T: Scalar, R: Rng>(mut b: Build<'_, T, R>, config: &EncoderConfig) -> Result<Self> {
        config.validate()?;
        let h = config.hidden;
        let word = b.tensor("embeddings.word_embeddings.weight".into(), &[config.vocab_size, h], InitKind::Normal)?;
        let position =
            b.tensor("embeddings.position_embeddings.weight".into(), &[config.max_position, h], InitKind::Normal)?;
        let token_type =
            b.tensor("embeddings.token_type_embeddings.weight".into(), &[config.type_vocab_size, h], InitKind::Normal)?;
        let emb_norm = b.norm("embeddings.LayerNorm", h)?;
        let mut layers = Vec::with_capacity(config.layers);
        for i in 0..config.layers {
            let p = format!("encoder.layer.{i}");
            layers.push(LayerParams {
                query: b.linear(&format!("{p}.attention.self.query"), h, h)?,
                key: b.linear(&format!("{p}.attention.self.key"), h, h)?,
                value: b.linear(&format!("{p}.attention.self.value"), h, h)?,
                attn_out: b.linear(&format!("{p}.attention.output.dense"), h, h)?,
                attn_norm: b.norm(&format!("{p}.attention.output.LayerNorm"), h)?,
                inter: b.linear(&format!("{p}.intermediate.dense"), config.intermediate, h)?,
                out: b.linear(&format!("{p}.output.dense"), h, config.intermediate)?,
                out_norm: b.norm(&format!("{p}.output.LayerNorm"), h)?,
            });
        }
        Ok(Self { config: config.clone(), word, position, token_type, emb_norm, layers })
    }

    /// Registers freshly initialized parameters (normal(0, 0.02) weights,
    /// zero biases, unit norms) in `store`.
    pub fn init<T: Scalar, R: Rng>(store: &mut ParamStore<T>, config: &EncoderConfig, rng: &mut R) -> Result<Self> {
        Self::build(Build::Init(store, rng), config)
    }

    /// Binds to parameters already present in `store`, checking every shape.
    pub fn bind<T: Scalar>(store: &ParamStore<T>, config: &EncoderConfig) -> Result<Self> {
        Self::build::<T, ChaCha8Rng>(Build::Bind(store), config)
    }

    /// Seeded reference encoder with its own parameter store.
    pub fn tiny_reference<T: Scalar>(config: &EncoderConfig, seed: u64) -> Result<(Self, ParamStore<T>)> {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let enc = Self::init(&mut store, config, &mut rng)?;
        Ok((enc, store))
    }

    /// Loads `config.json` + `manifest.json` + `weights.bin` from `dir`.
    pub fn load_checkpoint<T: Scalar>(dir: impl AsRef<Path>) -> Result<(Self, ParamStore<T>)> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(Error::NotFound(dir.to_path_buf()));
        }
        let config: EncoderConfig = archive::read_json(dir.join(archive::CONFIG_FILE))?;
        let store = archive::read(dir)?;
        let enc = Self::bind(&store, &config)?;
        Ok((enc, store))
    }

    /// Writes an encoder-only checkpoint directory.
    pub fn save_checkpoint<T: Scalar>(&self, store: &ParamStore<T>, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        archive::write(dir, store)?;
        archive::write_json(dir.join(archive::CONFIG_FILE), &self.config)
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    /// Outputs of every transformer block (embedding layer excluded).
    pub fn hidden_states<T: Scalar>(&self, g: &mut Graph<'_, T>, ex: &TokenizedExample) -> Result<Vec<Var>> {
        self.hidden_states_tapped(g, ex, &mut |_, _, h| h)
    }

    /// Like [`hidden_states`](Self::hidden_states), passing each block's
    /// output through `tap(graph, layer_index, output)` before it feeds the
    /// next block. Used by tests to intervene on individual layers.
    pub fn hidden_states_tapped<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        ex: &TokenizedExample,
        tap: &mut dyn FnMut(&mut Graph<'_, T>, usize, Var) -> Var,
    ) -> Result<Vec<Var>> {
        let cfg = &self.config;
        let l = ex.len();
        if l > cfg.max_position {
            return Err(Error::Capacity { len: l, max: cfg.max_position });
        }
        if let Some(&bad) = ex.ids.iter().find(|&&i| i as usize >= cfg.vocab_size) {
            return Err(Error::Contract(format!("token id {bad} outside vocabulary of {}", cfg.vocab_size)));
        }
        let eps = T::lit(cfg.layer_norm_eps);
        let p = |g: &mut Graph<'_, T>, id| g.param(id);

        let word = p(g, self.word);
        let pos = p(g, self.position);
        let typ = p(g, self.token_type);
        let we = g.gather(word, &ex.positions());
        let pe = g.gather(pos, &(0..l).collect::<Vec<_>>());
        let te = g.gather(typ, &vec![0; l]);
        let sum = g.add(we, pe);
        let emb = g.add(sum, te);
        let (ng, nb) = (p(g, self.emb_norm.0), p(g, self.emb_norm.1));
        let mut h = g.layer_norm(emb, ng, nb, eps);

        let mut states = Vec::with_capacity(cfg.layers);
        for (i, lp) in self.layers.iter().enumerate() {
            let lin = |g: &mut Graph<'_, T>, x, (w, b): (ParamId, ParamId)| {
                let (w, b) = (g.param(w), g.param(b));
                g.linear(x, w, Some(b))
            };
            let q = lin(g, h, lp.query);
            let k = lin(g, h, lp.key);
            let v = lin(g, h, lp.value);
            let ctx = g.attention(q, k, v, &ex.mask, cfg.heads);
            let a = lin(g, ctx, lp.attn_out);
            let res = g.add(a, h);
            let (ng, nb) = (p(g, lp.attn_norm.0), p(g, lp.attn_norm.1));
            let h1 = g.layer_norm(res, ng, nb, eps);
            let inter = lin(g, h1, lp.inter);
            let act = g.gelu(inter);
            let o = lin(g, act, lp.out);
            let res = g.add(o, h1);
            let (ng, nb) = (p(g, lp.out_norm.0), p(g, lp.out_norm.1));
            let out = g.layer_norm(res, ng, nb, eps);
            if !g.value(out).is_finite() {
                return Err(Error::numeric(format!("encoder layer {i}")));
            }
            h = tap(g, i, out);
            states.push(h);
        }
        Ok(states)
    }

    /// The last four block outputs stacked as `[4, L, H]`.
    pub fn last_four<T: Scalar>(&self, g: &mut Graph<'_, T>, ex: &TokenizedExample) -> Result<Var> {
        let states = self.hidden_states(g, ex)?;
        Ok(g.stack(&states[states.len() - STACK_CHANNELS..]))
    }

    pub fn embedding_stack<T: Scalar>(&self, store: &ParamStore<T>, ex: &TokenizedExample) -> Result<EmbeddingStack<T>> {
        let mut g = Graph::new(store);
        let s = self.last_four(&mut g, ex)?;
        Ok(EmbeddingStack { values: g.value(s).clone(), mask: ex.mask.clone() })
    }
}

/// Encodes every example independently (in parallel) into its stack.
pub fn encode_batch<T: Scalar>(
    encoder: &TransformerEncoder,
    store: &ParamStore<T>,
    examples: &[TokenizedExample],
) -> Result<Vec<EmbeddingStack<T>>> {
    examples.par_iter().map(|ex| encoder.embedding_stack(store, ex)).collect()
}

/// Forward pass of a freshly seeded reference encoder.
pub fn tiny_reference_forward<T: Scalar>(
    example: &TokenizedExample,
    config: &EncoderConfig,
    seed: u64,
) -> Result<EmbeddingStack<T>> {
    let (enc, store) = TransformerEncoder::tiny_reference::<T>(config, seed)?;
    enc.embedding_stack(&store, example)
}
