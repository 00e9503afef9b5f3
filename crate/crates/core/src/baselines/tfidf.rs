//! Top-k count vectorizer with smoothed inverse document frequency.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FEATURES: usize = 3000;

/// Sparse row: `(feature index, value)` sorted by index.
pub type SparseVec = Vec<(u32, f64)>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermWeighting {
    /// `count × idf`, rows L2-normalized.
    #[default]
    TfIdf,
    /// Raw counts, no idf, no normalization.
    Counts,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TfidfVectorizer {
    pub vocabulary: Vec<String>,
    pub document_frequency: Vec<usize>,
    pub idf: Vec<f64>,
    pub n_documents: usize,
    pub weighting: TermWeighting,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl TfidfVectorizer {
    /// Keeps the `k` tokens with the highest total count (ties broken
    /// lexicographically). `idf = ln((1 + N) / (1 + df)) + 1`.
    pub fn fit(corpus: &[Vec<String>], k: usize, weighting: TermWeighting) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Config("cannot fit a vectorizer on an empty corpus".into()));
        }
        let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
        for doc in corpus {
            let mut seen = std::collections::HashSet::new();
            for t in doc {
                let e = counts.entry(t.as_str()).or_default();
                e.0 += 1;
                if seen.insert(t.as_str()) {
                    e.1 += 1;
                }
            }
        }
        if counts.len() < k {
            log::warn!("requested {k} features but corpus has only {} distinct tokens", counts.len());
        }
        let mut ranked: Vec<(&str, (usize, usize))> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.0.cmp(b.0)));
        ranked.truncate(k);
        let n = corpus.len();
        let vocabulary: Vec<String> = ranked.iter().map(|(t, _)| t.to_string()).collect();
        let document_frequency: Vec<usize> = ranked.iter().map(|(_, (_, df))| *df).collect();
        let idf = document_frequency
            .iter()
            .map(|&df| ((1 + n) as f64 / (1 + df) as f64).ln() + 1.0)
            .collect();
        let mut v = Self { vocabulary, document_frequency, idf, n_documents: n, weighting, index: HashMap::new() };
        v.rebuild_index();
        Ok(v)
    }

    /// Restores the lookup table after deserialization.
    pub fn rebuild_index(&mut self) {
        self.index = self.vocabulary.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
    }

    pub fn features(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn transform(&self, doc: &[String]) -> SparseVec {
        let mut counts: HashMap<u32, f64> = HashMap::new();
        for t in doc {
            if let Some(&j) = self.index.get(t) {
                *counts.entry(j).or_default() += 1.0;
            }
        }
        let mut row: SparseVec = counts.into_iter().collect();
        row.sort_by_key(|&(j, _)| j);
        if self.weighting == TermWeighting::TfIdf {
            for (j, v) in &mut row {
                *v *= self.idf[*j as usize];
            }
            let norm = row.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for (_, v) in &mut row {
                    *v /= norm;
                }
            }
        }
        row
    }

    pub fn transform_all(&self, corpus: &[Vec<String>]) -> Vec<SparseVec> {
        corpus.iter().map(|d| self.transform(d)).collect()
    }
}

/// Fits a top-`k` TF-IDF vectorizer and returns it with the feature rows.
pub fn tfidf_featurize(corpus: &[Vec<String>], k: usize) -> Result<(TfidfVectorizer, Vec<SparseVec>)> {
    let v = TfidfVectorizer::fit(corpus, k, TermWeighting::TfIdf)?;
    let rows = v.transform_all(corpus);
    Ok((v, rows))
}

pub fn to_dense(row: &SparseVec, width: usize) -> Vec<f64> {
    let mut d = vec![0.0; width];
    for &(j, v) in row {
        d[j as usize] = v;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(xs: &[&[&str]]) -> Vec<Vec<String>> {
        xs.iter().map(|d| d.iter().map(|s| s.to_string()).collect()).collect()
    }

    #[test]
    fn single_token_document_is_unit() {
        let (v, rows) = tfidf_featurize(&docs(&[&["a"]]), 3000).unwrap();
        assert_eq!(v.features(), 1);
        assert_eq!(rows[0], vec![(0, 1.0)]);
    }

    #[test]
    fn out_of_vocabulary_tokens_are_ignored() {
        let corpus = docs(&[&["a", "a", "b"], &["a", "c"]]);
        let v = TfidfVectorizer::fit(&corpus, 1, TermWeighting::TfIdf).unwrap();
        assert_eq!(v.vocabulary, ["a"]);
        assert_eq!(v.transform(&docs(&[&["a", "zzz", "b"]])[0]), vec![(0, 1.0)]);
    }

    #[test]
    fn frequency_ties_break_lexicographically() {
        let corpus = docs(&[&["b", "a", "c", "c"]]);
        let v = TfidfVectorizer::fit(&corpus, 2, TermWeighting::TfIdf).unwrap();
        assert_eq!(v.vocabulary, ["c", "a"]);
    }

    #[test]
    fn counts_mode_is_raw() {
        let corpus = docs(&[&["x", "x", "y"]]);
        let v = TfidfVectorizer::fit(&corpus, 10, TermWeighting::Counts).unwrap();
        assert_eq!(v.transform(&corpus[0]), vec![(0, 2.0), (1, 1.0)]);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert!(tfidf_featurize(&[], 10).is_err());
    }

    #[test]
    fn serde_round_trip_restores_lookup() {
        let corpus = docs(&[&["a", "b"], &["b"]]);
        let v = TfidfVectorizer::fit(&corpus, 10, TermWeighting::TfIdf).unwrap();
        let mut back: TfidfVectorizer = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        back.rebuild_index();
        assert_eq!(back.transform(&corpus[0]), v.transform(&corpus[0]));
    }
}
