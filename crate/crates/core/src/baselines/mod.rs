//! Comparison systems: TF-IDF + linear SVM, CNN-Text, BiLSTM and a plain
//! `[CLS]` classifier on the encoder.

pub mod bert_cls;
pub mod bilstm;
pub mod cnn_text;
pub mod svm;
pub mod tfidf;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use bert_cls::ClsHead;
pub use bilstm::{BiLstm, BiLstmConfig, Direction};
pub use cnn_text::{CnnText, CnnTextConfig};
pub use svm::{dense_to_sparse, train_linear_svm, LinearSvm, SvmConfig};
pub use tfidf::{tfidf_featurize, to_dense, SparseVec, TermWeighting, TfidfVectorizer, DEFAULT_FEATURES};

use crate::archive;
use crate::corpus::{Label, LabeledTweet};
use crate::error::Result;
use crate::graph::sigmoid;
use crate::preprocess::{basic_tokenize, normalize, Language};

pub const TFIDF_FILE: &str = "tfidf.json";

/// Lowercased normalized words used as TF-IDF terms.
pub fn tfidf_tokens(text: &str, language: Language) -> Vec<String> {
    basic_tokenize(&normalize(text, language).to_lowercase())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    pub language: Language,
    pub vectorizer: TfidfVectorizer,
    pub svm: LinearSvm,
}

impl TfidfModel {
    pub fn fit(
        train: &[LabeledTweet],
        language: Language,
        features: usize,
        weighting: TermWeighting,
        svm: &SvmConfig,
    ) -> Result<Self> {
        let docs: Vec<Vec<String>> = train.iter().map(|t| tfidf_tokens(&t.text, language)).collect();
        let vectorizer = TfidfVectorizer::fit(&docs, features, weighting)?;
        let rows = vectorizer.transform_all(&docs);
        let labels: Vec<Label> = train.iter().map(|t| t.label).collect();
        let svm = train_linear_svm(&rows, &labels, vectorizer.features(), svm)?;
        Ok(Self { language, vectorizer, svm })
    }

    pub fn decision(&self, text: &str) -> f64 {
        self.svm.decision(&self.vectorizer.transform(&tfidf_tokens(text, self.language)))
    }

    /// Sigmoid of the decision value, so the 0.5 threshold coincides with
    /// the sign of the margin.
    pub fn score(&self, text: &str) -> f64 {
        sigmoid(self.decision(text))
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        archive::write_json(dir.as_ref().join(TFIDF_FILE), self)
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let mut m: Self = archive::read_json(dir.as_ref().join(TFIDF_FILE))?;
        m.vectorizer.rebuild_index();
        Ok(m)
    }
}
