//! Stacked bidirectional LSTM classifier over trainable word embeddings.
//!
//! Recurrences run over the unmasked prefix only. The classifier sees the
//! top layer's forward state at the last real position concatenated with
//! its backward state at position 0.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::cnn_text::{check_ids, DEFAULT_EMBED_DIM, EMBEDDING_NAME};
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::head::{dropout, reborrow};
use crate::params::{init, ParamId, ParamStore};
use crate::preprocess::TokenizedExample;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const DEFAULT_LAYERS: usize = 2;
pub const DEFAULT_HIDDEN: usize = 128;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiLstmConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    #[serde(default)]
    pub dropout: f64,
}

impl BiLstmConfig {
    pub fn new(vocab_size: usize) -> Self {
        Self { vocab_size, embed_dim: DEFAULT_EMBED_DIM, hidden: DEFAULT_HIDDEN, layers: DEFAULT_LAYERS, dropout: 0.0 }
    }

    fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.embed_dim == 0 || self.hidden == 0 || self.layers == 0 {
            return Err(Error::Config("BiLSTM dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn tag(self) -> &'static str {
        match self {
            Direction::Forward => "fwd",
            Direction::Backward => "bwd",
        }
    }
}

/// Gate blocks are stacked in the order input, forget, candidate, output.
#[derive(Clone, Copy, Debug)]
pub struct CellParams {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub bias: ParamId,
}

#[derive(Clone, Copy)]
enum Init {
    Normal(f64),
    Uniform(f64),
    Zeros,
}

#[derive(Clone, Debug)]
pub struct BiLstm {
    config: BiLstmConfig,
    embeddings: ParamId,
    cells: Vec<[CellParams; 2]>,
    dense_weight: ParamId,
    dense_bias: ParamId,
}

pub fn cell_prefix(layer: usize, dir: Direction) -> String {
    format!("lstm.l{layer}.{}", dir.tag())
}

impl BiLstm {
    fn build<T: Scalar>(
        config: &BiLstmConfig,
        mut make: impl FnMut(String, Vec<usize>, Init) -> Result<ParamId>,
    ) -> Result<Self> {
        config.validate()?;
        let h = config.hidden;
        let embeddings = make(EMBEDDING_NAME.into(), vec![config.vocab_size, config.embed_dim], Init::Normal(1.0))?;
        let limit = 1.0 / (h as f64).sqrt();
        let mut cells = Vec::with_capacity(config.layers);
        for layer in 0..config.layers {
            let input = if layer == 0 { config.embed_dim } else { 2 * h };
            let mut pair = Vec::with_capacity(2);
            for dir in [Direction::Forward, Direction::Backward] {
                let p = cell_prefix(layer, dir);
                pair.push(CellParams {
                    w_ih: make(format!("{p}.w_ih"), vec![4 * h, input], Init::Uniform(limit))?,
                    w_hh: make(format!("{p}.w_hh"), vec![4 * h, h], Init::Uniform(limit))?,
                    bias: make(format!("{p}.bias"), vec![4 * h], Init::Uniform(limit))?,
                });
            }
            cells.push([pair[0], pair[1]]);
        }
        let dense_weight = make("classifier.weight".into(), vec![1, 2 * h], Init::Uniform(init::glorot_limit(2 * h, 1)))?;
        let dense_bias = make("classifier.bias".into(), vec![1], Init::Zeros)?;
        Ok(Self { config: config.clone(), embeddings, cells, dense_weight, dense_bias })
    }

    /// Embeddings ~ N(0, 1); recurrent weights and biases ~ U(±1/√hidden);
    /// Glorot-uniform dense layer; zero dense bias.
    pub fn init<T: Scalar, R: Rng>(store: &mut ParamStore<T>, config: &BiLstmConfig, rng: &mut R) -> Result<Self> {
        Self::build::<T>(config, |name, shape, spec| {
            let t = match spec {
                Init::Normal(std) => init::normal(rng, &shape, std),
                Init::Uniform(limit) => init::uniform(rng, &shape, limit),
                Init::Zeros => Tensor::zeros(&shape),
            };
            store.insert(name, t)
        })
    }

    pub fn bind<T: Scalar>(store: &ParamStore<T>, config: &BiLstmConfig) -> Result<Self> {
        Self::build::<T>(config, |name, shape, _| store.expect(&name, &shape))
    }

    pub fn config(&self) -> &BiLstmConfig {
        &self.config
    }

    pub fn cell(&self, layer: usize, dir: Direction) -> CellParams {
        self.cells[layer][dir as usize]
    }

    /// Hidden states of one direction over `input: [n, in]`, returned in
    /// position order regardless of direction.
    pub fn run_direction<T: Scalar>(&self, g: &mut Graph<'_, T>, input: Var, cell: CellParams, dir: Direction) -> Vec<Var> {
        let h = self.config.hidden;
        let n = g.value(input).rows();
        let (w_ih, w_hh, bias) = (g.param(cell.w_ih), g.param(cell.w_hh), g.param(cell.bias));
        let projected = g.linear(input, w_ih, Some(bias));
        let mut hs = g.constant(Tensor::zeros(&[h]));
        let mut cs = g.constant(Tensor::zeros(&[h]));
        let mut out = vec![None; n];
        let steps: Vec<usize> = match dir {
            Direction::Forward => (0..n).collect(),
            Direction::Backward => (0..n).rev().collect(),
        };
        for t in steps {
            let xp = g.row(projected, t);
            let rec = g.linear(hs, w_hh, None);
            let gates = g.add(xp, rec);
            let i = g.slice(gates, 0, h);
            let i = g.sigmoid(i);
            let f = g.slice(gates, h, h);
            let f = g.sigmoid(f);
            let c_hat = g.slice(gates, 2 * h, h);
            let c_hat = g.tanh(c_hat);
            let o = g.slice(gates, 3 * h, h);
            let o = g.sigmoid(o);
            let keep = g.mul(f, cs);
            let write = g.mul(i, c_hat);
            cs = g.add(keep, write);
            let squashed = g.tanh(cs);
            hs = g.mul(o, squashed);
            out[t] = Some(hs);
        }
        out.into_iter().map(|v| v.expect("every step visited")).collect()
    }

    /// Top-layer `(forward at last real position, backward at position 0)`.
    pub fn final_states<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        ex: &TokenizedExample,
        mut dropout_rng: Option<&mut dyn RngCore>,
    ) -> Result<(Var, Var)> {
        check_ids(ex, self.config.vocab_size)?;
        let n = ex.real_len();
        if n == 0 {
            return Err(Error::Contract("example has no unmasked positions".into()));
        }
        let table = g.param(self.embeddings);
        let mut x = g.gather(table, &ex.positions()[..n]);
        let mut last = None;
        for (layer, pair) in self.cells.iter().enumerate() {
            if layer > 0 {
                if let Some(rng) = reborrow(&mut dropout_rng) {
                    x = dropout(g, x, self.config.dropout, rng);
                }
            }
            let fwd = self.run_direction(g, x, pair[0], Direction::Forward);
            let bwd = self.run_direction(g, x, pair[1], Direction::Backward);
            last = Some((fwd[n - 1], bwd[0]));
            if layer + 1 < self.cells.len() {
                let rows: Vec<Var> = fwd.iter().zip(&bwd).map(|(&a, &b)| g.concat(&[a, b])).collect();
                x = g.stack(&rows);
            }
        }
        Ok(last.expect("at least one layer"))
    }

    pub fn logit<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        ex: &TokenizedExample,
        mut dropout_rng: Option<&mut dyn RngCore>,
    ) -> Result<Var> {
        let (f, b) = self.final_states(g, ex, reborrow(&mut dropout_rng))?;
        let mut z = g.concat(&[f, b]);
        if let Some(rng) = dropout_rng {
            z = dropout(g, z, self.config.dropout, rng);
        }
        let (w, bias) = (g.param(self.dense_weight), g.param(self.dense_bias));
        Ok(g.linear(z, w, Some(bias)))
    }
}
