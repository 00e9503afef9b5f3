//! Tweet normalization and tokenization.

mod greek;
mod hashtag;
mod vocab;
mod wordpiece;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use greek::normalize_greek;
pub use hashtag::{segment_hashtags, split_words};
pub use vocab::{Vocabulary, CLS, CONTINUATION, PAD, SEP, UNK};
pub use wordpiece::{
    basic_tokenize, detokenize, encode, wordpiece_tokenize, wordpiece_word, TokenizedExample, DEFAULT_MAX_LEN,
    MAX_WORD_CHARS,
};

use crate::corpus::Label;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Language {
    #[serde(rename = "ar")]
    Arabic,
    #[serde(rename = "el")]
    Greek,
    #[serde(rename = "tr")]
    Turkish,
}

impl Language {
    pub fn code(self) -> &'static str {
        match self {
            Language::Arabic => "ar",
            Language::Greek => "el",
            Language::Turkish => "tr",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Language::Arabic => "Arabic",
            Language::Greek => "Greek",
            Language::Turkish => "Turkish",
        }
    }
}

impl FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ar" => Ok(Language::Arabic),
            "el" => Ok(Language::Greek),
            "tr" => Ok(Language::Turkish),
            other => Err(format!("unsupported language `{other}` (expected ar, el or tr)")),
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Language-dependent text normalization: hashtag segmentation for every
/// language, then Greek lowercasing and diacritic stripping for Greek.
pub fn normalize(text: &str, language: Language) -> String {
    let text = segment_hashtags(text);
    match language {
        Language::Greek => normalize_greek(&text),
        Language::Arabic | Language::Turkish => text,
    }
}

/// Text → fixed-length token ids for one language and vocabulary.
#[derive(Clone, Debug)]
pub struct Preprocessor {
    pub language: Language,
    pub vocab: Vocabulary,
    pub max_len: usize,
    pub lowercase: bool,
}

impl Preprocessor {
    pub fn new(language: Language, vocab: Vocabulary, max_len: usize) -> Self {
        Self { language, vocab, max_len, lowercase: false }
    }

    /// Normalized words before WordPiece.
    pub fn words(&self, text: &str) -> Vec<String> {
        let mut text = normalize(text, self.language);
        if self.lowercase {
            text = text.to_lowercase();
        }
        basic_tokenize(&text)
    }

    pub fn tokens(&self, text: &str) -> Vec<String> {
        self.words(text).iter().flat_map(|w| wordpiece_word(w, &self.vocab)).collect()
    }

    pub fn example(&self, text: &str, label: Option<Label>) -> TokenizedExample {
        encode(&self.tokens(text), &self.vocab, self.max_len, label)
    }
}
