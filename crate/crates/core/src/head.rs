//! Multi-width convolutional classification head.
//!
//! Each filter of width `w` spans all input channels and the full embedding
//! width, so a valid convolution over `[C, L, H]` leaves one activation per
//! window position. Activations go through ReLU and a global max over
//! positions; pooled features from every width are concatenated and mapped
//! to a single logit.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::encoder::EmbeddingStack;
use crate::error::{Error, Result};
use crate::graph::{sigmoid, Graph, Var};
use crate::params::{init, ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const DEFAULT_FILTER_WIDTHS: [usize; 5] = [1, 2, 3, 4, 5];
pub const DEFAULT_FILTERS_PER_WIDTH: usize = 32;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub filter_widths: Vec<usize>,
    pub filters_per_width: usize,
    pub in_channels: usize,
    pub embed_dim: usize,
    #[serde(default)]
    pub dropout: f64,
}

impl HeadConfig {
    /// 5 widths × 32 filters over the 4-channel layer stack.
    pub fn bert_cnn(embed_dim: usize) -> Self {
        Self {
            filter_widths: DEFAULT_FILTER_WIDTHS.to_vec(),
            filters_per_width: DEFAULT_FILTERS_PER_WIDTH,
            in_channels: 4,
            embed_dim,
            dropout: 0.0,
        }
    }

    pub fn total_filters(&self) -> usize {
        self.filter_widths.len() * self.filters_per_width
    }

    pub fn validate(&self, seq_len: usize) -> Result<()> {
        if self.filter_widths.is_empty() || self.filters_per_width == 0 || self.in_channels == 0 || self.embed_dim == 0 {
            return Err(Error::Config("head dimensions must be positive".into()));
        }
        if let Some(&w) = self.filter_widths.iter().find(|&&w| w == 0 || w > seq_len) {
            return Err(Error::Config(format!("filter width {w} invalid for sequence length {seq_len}")));
        }
        let mut seen = self.filter_widths.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.filter_widths.len() {
            return Err(Error::Config("filter widths must be distinct".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        Ok(())
    }
}

/// Closed-form parameter count: conv kernels and biases plus the dense layer.
pub fn parameter_count(config: &HeadConfig) -> usize {
    let conv: usize = config
        .filter_widths
        .iter()
        .map(|&w| config.filters_per_width * config.in_channels * w * config.embed_dim + config.filters_per_width)
        .sum();
    conv + config.total_filters() + 1
}

/// Label 1 iff `p >= threshold`; ties go to Offensive.
pub fn predict_label<T: Scalar>(p: T, threshold: T) -> Label {
    Label::from_bit(p >= threshold)
}

#[derive(Clone, Debug)]
pub struct ConvHead {
    config: HeadConfig,
    kernels: Vec<(ParamId, ParamId)>,
    dense_weight: ParamId,
    dense_bias: ParamId,
}

impl ConvHead {
    pub fn kernel_name(prefix: &str, width: usize) -> String {
        format!("{prefix}.conv.w{width}.kernel")
    }

    pub fn bias_name(prefix: &str, width: usize) -> String {
        format!("{prefix}.conv.w{width}.bias")
    }

    fn shapes(config: &HeadConfig, w: usize) -> [usize; 4] {
        [config.filters_per_width, config.in_channels, w, config.embed_dim]
    }

    /// Glorot-uniform kernels and dense weights, zero biases.
    pub fn init<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        config: &HeadConfig,
        prefix: &str,
        rng: &mut R,
    ) -> Result<Self> {
        let mut kernels = Vec::new();
        for &w in &config.filter_widths {
            let shape = Self::shapes(config, w);
            let fan_in = config.in_channels * w * config.embed_dim;
            let fan_out = config.filters_per_width * w * config.embed_dim;
            let k = store.insert(Self::kernel_name(prefix, w), init::uniform(rng, &shape, init::glorot_limit(fan_in, fan_out)))?;
            let b = store.insert(Self::bias_name(prefix, w), Tensor::zeros(&[config.filters_per_width]))?;
            kernels.push((k, b));
        }
        let total = config.total_filters();
        let dense_weight =
            store.insert(format!("{prefix}.dense.weight"), init::uniform(rng, &[total], init::glorot_limit(total, 1)))?;
        let dense_bias = store.insert(format!("{prefix}.dense.bias"), Tensor::zeros(&[1]))?;
        Ok(Self { config: config.clone(), kernels, dense_weight, dense_bias })
    }

    pub fn bind<T: Scalar>(store: &ParamStore<T>, config: &HeadConfig, prefix: &str) -> Result<Self> {
        let mut kernels = Vec::new();
        for &w in &config.filter_widths {
            let k = store.expect(&Self::kernel_name(prefix, w), &Self::shapes(config, w))?;
            let b = store.expect(&Self::bias_name(prefix, w), &[config.filters_per_width])?;
            kernels.push((k, b));
        }
        let total = config.total_filters();
        Ok(Self {
            config: config.clone(),
            kernels,
            dense_weight: store.expect(&format!("{prefix}.dense.weight"), &[total])?,
            dense_bias: store.expect(&format!("{prefix}.dense.bias"), &[1])?,
        })
    }

    pub fn config(&self) -> &HeadConfig {
        &self.config
    }

    /// Pooled feature vector `[total_filters]` for an input var `[C, L, H]`.
    pub fn pooled<T: Scalar>(&self, g: &mut Graph<'_, T>, input: Var) -> Result<Var> {
        let shape = g.value(input).shape().to_vec();
        if shape.len() != 3 || shape[0] != self.config.in_channels || shape[2] != self.config.embed_dim {
            return Err(Error::Config(format!(
                "head expects [{}, L, {}] input, got {shape:?}",
                self.config.in_channels, self.config.embed_dim
            )));
        }
        self.config.validate(shape[1])?;
        let mut pooled = Vec::with_capacity(self.kernels.len());
        for &(k, b) in &self.kernels {
            let (k, b) = (g.param(k), g.param(b));
            let c = g.conv(input, k, b);
            let r = g.relu(c);
            pooled.push(g.max_last(r));
        }
        Ok(g.concat(&pooled))
    }

    /// Logit `[1]` for an input var. Dropout on the pooled features applies
    /// only when `dropout_rng` is given and the configured rate is positive.
    pub fn logit<T: Scalar>(&self, g: &mut Graph<'_, T>, input: Var, dropout_rng: Option<&mut dyn RngCore>) -> Result<Var> {
        let mut z = self.pooled(g, input)?;
        if let Some(rng) = dropout_rng {
            z = dropout(g, z, self.config.dropout, rng);
        }
        let total = self.config.total_filters();
        let w = g.param(self.dense_weight);
        let w = g.reshape(w, &[1, total]);
        let b = g.param(self.dense_bias);
        Ok(g.linear(z, w, Some(b)))
    }

    /// Probability for a precomputed embedding stack.
    pub fn forward<T: Scalar>(&self, store: &ParamStore<T>, stack: &EmbeddingStack<T>) -> Result<T> {
        let mut g = Graph::new(store);
        let x = g.constant(stack.values.clone());
        let z = self.logit(&mut g, x, None)?;
        probability(g.value(z).data()[0])
    }
}

/// Inverted dropout: zeroes each element with probability `rate` and scales
/// survivors by `1 / (1 − rate)`.
pub fn dropout<T: Scalar>(g: &mut Graph<'_, T>, x: Var, rate: f64, rng: &mut dyn RngCore) -> Var {
    if rate <= 0.0 {
        return x;
    }
    let keep = T::lit(1.0 / (1.0 - rate));
    let shape = g.value(x).shape().to_vec();
    let n = g.value(x).len();
    let mask = (0..n).map(|_| if rng.gen::<f64>() < rate { T::zero() } else { keep }).collect();
    let m = g.constant(Tensor::from_vec(&shape, mask));
    g.mul(x, m)
}

/// Reborrows an optional dropout generator for a nested call.
pub(crate) fn reborrow<'a>(rng: &'a mut Option<&mut dyn RngCore>) -> Option<&'a mut dyn RngCore> {
    match rng {
        Some(r) => Some(&mut **r),
        None => None,
    }
}

/// Sigmoid of a logit, rejecting non-finite values.
pub fn probability<T: Scalar>(logit: T) -> Result<T> {
    if !logit.is_finite() {
        return Err(Error::numeric("classifier output"));
    }
    Ok(sigmoid(logit))
}
