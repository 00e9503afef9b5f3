//! Offensive-language classification: a convolutional head over the last
//! four hidden layers of a transformer encoder, the comparison baselines,
//! training, and evaluation.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common choices.

pub mod archive;
pub mod baselines;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod graph;
pub mod head;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod params;
pub mod pipeline;
pub mod preprocess;
pub mod scalar;
pub mod tensor;
pub mod training;

pub use corpus::{DataSplit, Label, LabeledTweet, Schema, Tweet};
pub use encoder::{EmbeddingStack, EncoderConfig, TransformerEncoder};
pub use error::{Error, Result};
pub use head::{ConvHead, HeadConfig};
pub use metrics::{Confusion, EvalReport};
pub use model::{ModelKind, NeuralClassifier, NeuralConfig};
pub use pipeline::{CheckpointConfig, Classifier, Pipeline};
pub use preprocess::{Language, Preprocessor, TokenizedExample, Vocabulary};
pub use scalar::Scalar;
pub use training::{RunHistory, TrainConfig};

pub type Tensor32 = tensor::Tensor<f32>;
pub type Tensor64 = tensor::Tensor<f64>;
pub type ParamStore32 = params::ParamStore<f32>;
pub type ParamStore64 = params::ParamStore<f64>;
pub type Classifier32 = NeuralClassifier<f32>;
pub type Classifier64 = NeuralClassifier<f64>;
pub type Pipeline32 = Pipeline<f32>;
pub type Pipeline64 = Pipeline<f64>;
