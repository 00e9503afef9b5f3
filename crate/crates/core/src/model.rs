//! Neural classifier variants behind one type.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::archive;
use crate::baselines::{BiLstm, BiLstmConfig, ClsHead, CnnText, CnnTextConfig};
use crate::corpus::Label;
use crate::encoder::{EncoderConfig, TransformerEncoder};
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::head::{predict_label, probability, ConvHead, HeadConfig};
use crate::params::{Gradients, ParamStore};
use crate::preprocess::TokenizedExample;
use crate::scalar::Scalar;

pub const HEAD_PREFIX: &str = "head";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    BertCnn,
    Bert,
    CnnText,
    Bilstm,
    SvmTfidf,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] =
        [ModelKind::BertCnn, ModelKind::Bert, ModelKind::CnnText, ModelKind::Bilstm, ModelKind::SvmTfidf];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::BertCnn => "bert_cnn",
            ModelKind::Bert => "bert",
            ModelKind::CnnText => "cnn_text",
            ModelKind::Bilstm => "bilstm",
            ModelKind::SvmTfidf => "svm_tfidf",
        }
    }

    /// Row label used in result tables.
    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::BertCnn => "BERT-CNN",
            ModelKind::Bert => "BERT",
            ModelKind::CnnText => "CNN-Text",
            ModelKind::Bilstm => "Bi-LSTM",
            ModelKind::SvmTfidf => "SVM with TF-IDF",
        }
    }

    pub fn uses_encoder(self) -> bool {
        matches!(self, ModelKind::BertCnn | ModelKind::Bert)
    }

    pub fn is_neural(self) -> bool {
        self != ModelKind::SvmTfidf
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown model `{s}` (expected bert_cnn, bert, cnn_text, bilstm or svm_tfidf)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum NeuralConfig {
    BertCnn { encoder: EncoderConfig, head: HeadConfig },
    Bert {
        encoder: EncoderConfig,
        #[serde(default)]
        dropout: f64,
    },
    CnnText(CnnTextConfig),
    Bilstm(BiLstmConfig),
}

impl NeuralConfig {
    pub fn kind(&self) -> ModelKind {
        match self {
            NeuralConfig::BertCnn { .. } => ModelKind::BertCnn,
            NeuralConfig::Bert { .. } => ModelKind::Bert,
            NeuralConfig::CnnText(_) => ModelKind::CnnText,
            NeuralConfig::Bilstm(_) => ModelKind::Bilstm,
        }
    }

    pub fn vocab_size(&self) -> usize {
        match self {
            NeuralConfig::BertCnn { encoder, .. } | NeuralConfig::Bert { encoder, .. } => encoder.vocab_size,
            NeuralConfig::CnnText(c) => c.vocab_size,
            NeuralConfig::Bilstm(c) => c.vocab_size,
        }
    }

    pub fn encoder(&self) -> Option<&EncoderConfig> {
        match self {
            NeuralConfig::BertCnn { encoder, .. } | NeuralConfig::Bert { encoder, .. } => Some(encoder),
            _ => None,
        }
    }

    /// Default configuration of `kind` over an encoder (ignored for the
    /// embedding baselines) and vocabulary size. `None` for the SVM.
    pub fn default_for(kind: ModelKind, encoder: EncoderConfig, vocab_size: usize) -> Option<Self> {
        match kind {
            ModelKind::BertCnn => Some(NeuralConfig::BertCnn { head: HeadConfig::bert_cnn(encoder.hidden), encoder }),
            ModelKind::Bert => Some(NeuralConfig::Bert { encoder, dropout: 0.0 }),
            ModelKind::CnnText => Some(NeuralConfig::CnnText(CnnTextConfig::new(vocab_size))),
            ModelKind::Bilstm => Some(NeuralConfig::Bilstm(BiLstmConfig::new(vocab_size))),
            ModelKind::SvmTfidf => None,
        }
    }
}

#[derive(Clone, Debug)]
enum Arch {
    BertCnn(TransformerEncoder, ConvHead),
    Bert(TransformerEncoder, ClsHead),
    CnnText(CnnText),
    Bilstm(BiLstm),
}

/// A neural classifier and the parameters it owns.
#[derive(Clone, Debug)]
pub struct NeuralClassifier<T> {
    config: NeuralConfig,
    arch: Arch,
    store: ParamStore<T>,
}

impl<T: Scalar> NeuralClassifier<T> {
    /// Fresh, seeded parameters for every component.
    pub fn init(config: NeuralConfig, seed: u64) -> Result<Self> {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let arch = match &config {
            NeuralConfig::BertCnn { encoder, head } => {
                let enc = TransformerEncoder::init(&mut store, encoder, &mut rng)?;
                Arch::BertCnn(enc, ConvHead::init(&mut store, head, HEAD_PREFIX, &mut rng)?)
            }
            NeuralConfig::Bert { encoder, dropout } => {
                let enc = TransformerEncoder::init(&mut store, encoder, &mut rng)?;
                Arch::Bert(enc, ClsHead::init(&mut store, encoder.hidden, *dropout, &mut rng)?)
            }
            NeuralConfig::CnnText(c) => Arch::CnnText(CnnText::init(&mut store, c, &mut rng)?),
            NeuralConfig::Bilstm(c) => Arch::Bilstm(BiLstm::init(&mut store, c, &mut rng)?),
        };
        Ok(Self { config, arch, store })
    }

    /// Starts from pretrained encoder weights and adds a seeded head.
    pub fn with_encoder(config: NeuralConfig, mut store: ParamStore<T>, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let arch = match &config {
            NeuralConfig::BertCnn { encoder, head } => {
                let enc = TransformerEncoder::bind(&store, encoder)?;
                Arch::BertCnn(enc, ConvHead::init(&mut store, head, HEAD_PREFIX, &mut rng)?)
            }
            NeuralConfig::Bert { encoder, dropout } => {
                let enc = TransformerEncoder::bind(&store, encoder)?;
                Arch::Bert(enc, ClsHead::init(&mut store, encoder.hidden, *dropout, &mut rng)?)
            }
            other => {
                return Err(Error::Config(format!("model `{}` does not use an encoder", other.kind())));
            }
        };
        Ok(Self { config, arch, store })
    }

    /// Binds to a complete parameter set, checking names and shapes.
    pub fn bind(config: NeuralConfig, store: ParamStore<T>) -> Result<Self> {
        let arch = match &config {
            NeuralConfig::BertCnn { encoder, head } => {
                Arch::BertCnn(TransformerEncoder::bind(&store, encoder)?, ConvHead::bind(&store, head, HEAD_PREFIX)?)
            }
            NeuralConfig::Bert { encoder, dropout } => Arch::Bert(
                TransformerEncoder::bind(&store, encoder)?,
                ClsHead::bind(&store, encoder.hidden, *dropout)?,
            ),
            NeuralConfig::CnnText(c) => Arch::CnnText(CnnText::bind(&store, c)?),
            NeuralConfig::Bilstm(c) => Arch::Bilstm(BiLstm::bind(&store, c)?),
        };
        Ok(Self { config, arch, store })
    }

    pub fn kind(&self) -> ModelKind {
        self.config.kind()
    }

    pub fn config(&self) -> &NeuralConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore<T> {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }

    pub fn into_store(self) -> ParamStore<T> {
        self.store
    }

    pub fn encoder(&self) -> Option<&TransformerEncoder> {
        match &self.arch {
            Arch::BertCnn(e, _) | Arch::Bert(e, _) => Some(e),
            _ => None,
        }
    }

    pub fn conv_head(&self) -> Option<&ConvHead> {
        match &self.arch {
            Arch::BertCnn(_, h) => Some(h),
            _ => None,
        }
    }

    pub fn cnn_text(&self) -> Option<&CnnText> {
        match &self.arch {
            Arch::CnnText(m) => Some(m),
            _ => None,
        }
    }

    pub fn bilstm(&self) -> Option<&BiLstm> {
        match &self.arch {
            Arch::Bilstm(m) => Some(m),
            _ => None,
        }
    }

    /// Logit var `[1]` on a graph over this classifier's store. Dropout is
    /// active only when `dropout_rng` is given.
    pub fn logit<'s>(
        &self,
        g: &mut Graph<'s, T>,
        ex: &TokenizedExample,
        dropout_rng: Option<&mut dyn RngCore>,
    ) -> Result<Var> {
        match &self.arch {
            Arch::BertCnn(enc, head) => {
                let stack = enc.last_four(g, ex)?;
                head.logit(g, stack, dropout_rng)
            }
            Arch::Bert(enc, head) => head.logit(g, enc, ex, dropout_rng),
            Arch::CnnText(m) => m.logit(g, ex, dropout_rng),
            Arch::Bilstm(m) => m.logit(g, ex, dropout_rng),
        }
    }

    pub fn probability(&self, ex: &TokenizedExample) -> Result<T> {
        let mut g = Graph::new(&self.store);
        let z = self.logit(&mut g, ex, None)?;
        probability(g.value(z).data()[0])
    }

    pub fn predict(&self, ex: &TokenizedExample, threshold: T) -> Result<Label> {
        Ok(predict_label(self.probability(ex)?, threshold))
    }

    /// Binary cross-entropy of one labelled example and its parameter
    /// gradients.
    pub fn loss_and_gradients(
        &self,
        ex: &TokenizedExample,
        dropout_rng: Option<&mut dyn RngCore>,
    ) -> Result<(T, Gradients<T>)> {
        let label = ex.label.ok_or_else(|| Error::Contract("training example has no label".into()))?;
        let target = if label == Label::Offensive { T::one() } else { T::zero() };
        let mut g = Graph::new(&self.store);
        let z = self.logit(&mut g, ex, dropout_rng)?;
        let loss = g.bce_with_logits(z, target);
        let value = g.value(loss).data()[0];
        Ok((value, g.backward(loss).into_params()))
    }

    /// Writes the weight archive; the config is recorded by the caller.
    pub fn save_weights(&self, dir: impl AsRef<Path>) -> Result<()> {
        archive::write(dir, &self.store)
    }

    pub fn load_weights(config: NeuralConfig, dir: impl AsRef<Path>) -> Result<Self> {
        Self::bind(config, archive::read(dir)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.as_str().parse::<ModelKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.as_str()));
        }
        assert!("svm".parse::<ModelKind>().is_err());
    }

    #[test]
    fn config_is_tagged_by_model() {
        let c = NeuralConfig::CnnText(CnnTextConfig::new(7));
        let json = serde_json::to_value(&c).unwrap();
        assert_eq!(json["model"], "cnn_text");
        assert_eq!(serde_json::from_value::<NeuralConfig>(json).unwrap(), c);
    }

    #[test]
    fn with_encoder_rejects_embedding_models() {
        let c = NeuralConfig::Bilstm(BiLstmConfig::new(7));
        assert!(NeuralClassifier::<f32>::with_encoder(c, ParamStore::new(), 0).is_err());
    }
}
