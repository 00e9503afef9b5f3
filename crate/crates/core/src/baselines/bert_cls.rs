//! Encoder plus a dense layer on the top layer's `[CLS]` vector.

use rand::{Rng, RngCore};

use crate::encoder::TransformerEncoder;
use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::head::dropout;
use crate::params::{init, ParamId, ParamStore};
use crate::preprocess::TokenizedExample;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const WEIGHT_NAME: &str = "classifier.weight";
pub const BIAS_NAME: &str = "classifier.bias";

#[derive(Clone, Debug)]
pub struct ClsHead {
    hidden: usize,
    weight: ParamId,
    bias: ParamId,
    dropout: f64,
}

impl ClsHead {
    /// Weight ~ N(0, 0.02), zero bias.
    pub fn init<T: Scalar, R: Rng>(store: &mut ParamStore<T>, hidden: usize, dropout: f64, rng: &mut R) -> Result<Self> {
        let weight = store.insert(WEIGHT_NAME, init::normal(rng, &[1, hidden], 0.02))?;
        let bias = store.insert(BIAS_NAME, Tensor::zeros(&[1]))?;
        Ok(Self { hidden, weight, bias, dropout })
    }

    pub fn bind<T: Scalar>(store: &ParamStore<T>, hidden: usize, dropout: f64) -> Result<Self> {
        Ok(Self {
            hidden,
            weight: store.expect(WEIGHT_NAME, &[1, hidden])?,
            bias: store.expect(BIAS_NAME, &[1])?,
            dropout,
        })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn logit<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        encoder: &TransformerEncoder,
        ex: &TokenizedExample,
        dropout_rng: Option<&mut dyn RngCore>,
    ) -> Result<Var> {
        let states = encoder.hidden_states(g, ex)?;
        let top = *states.last().expect("encoder has at least one layer");
        let mut cls = g.row(top, 0);
        if let Some(rng) = dropout_rng {
            cls = dropout(g, cls, self.dropout, rng);
        }
        let (w, b) = (g.param(self.weight), g.param(self.bias));
        Ok(g.linear(cls, w, Some(b)))
    }
}
