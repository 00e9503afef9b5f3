//! WordPiece vocabulary (`vocab.txt`: one token per line, line index = id).

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const CONTINUATION: &str = "##";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    pad: u32,
    unk: u32,
    cls: u32,
    sep: u32,
}

impl Vocabulary {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::Vocabulary(format!("duplicate token `{t}` at id {i}")));
            }
        }
        let special = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::Vocabulary(format!("special token {name} missing")))
        };
        Ok(Self { pad: special(PAD)?, unk: special(UNK)?, cls: special(CLS)?, sep: special(SEP)?, tokens, index })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let tokens = text
            .lines()
            .map(|l| l.strip_suffix('\r').unwrap_or(l).to_string())
            .collect();
        Self::from_tokens(tokens)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.tokens.join("\n");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Builds a word-level vocabulary from pre-tokenized text: the four
    /// special tokens, every character both as a word-initial piece and as a
    /// `##` continuation (so any word made of seen characters is coverable),
    /// then whole words by descending frequency (ties lexicographic) up to
    /// `max_size` entries.
    pub fn from_corpus<'a>(words: impl IntoIterator<Item = &'a str>, max_size: usize) -> Self {
        let mut freq: HashMap<&str, usize> = HashMap::new();
        let mut chars = std::collections::BTreeSet::new();
        for w in words {
            *freq.entry(w).or_default() += 1;
            chars.extend(w.chars());
        }
        let mut tokens: Vec<String> = [PAD, UNK, CLS, SEP].iter().map(|s| s.to_string()).collect();
        for c in &chars {
            tokens.push(c.to_string());
            tokens.push(format!("{CONTINUATION}{c}"));
        }
        let mut seen: std::collections::HashSet<String> = tokens.iter().cloned().collect();
        let mut words: Vec<(&str, usize)> = freq.into_iter().collect();
        words.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        for (w, _) in words {
            if tokens.len() >= max_size {
                break;
            }
            if seen.insert(w.to_string()) {
                tokens.push(w.to_string());
            }
        }
        Self::from_tokens(tokens).expect("constructed vocabulary is valid")
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn pad_id(&self) -> u32 {
        self.pad
    }

    pub fn unk_id(&self) -> u32 {
        self.unk
    }

    pub fn cls_id(&self) -> u32 {
        self.cls
    }

    pub fn sep_id(&self) -> u32 {
        self.sep
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specials_required() {
        let err = Vocabulary::parse("[PAD]\n[UNK]\n[CLS]\nfoo\n").unwrap_err();
        assert!(err.to_string().contains("[SEP]"));
    }

    #[test]
    fn duplicates_rejected() {
        assert!(Vocabulary::parse("[PAD]\n[UNK]\n[CLS]\n[SEP]\na\na\n").is_err());
    }

    #[test]
    fn line_number_is_id() {
        let v = Vocabulary::parse("[PAD]\n[UNK]\n[CLS]\n[SEP]\nhello\n").unwrap();
        assert_eq!(v.id("hello"), Some(4));
        assert_eq!(v.cls_id(), 2);
        assert_eq!(v.token(4), Some("hello"));
        assert_eq!(v.len(), 5);
    }

    #[test]
    fn corpus_vocabulary_orders_by_frequency() {
        let v = Vocabulary::from_corpus(["b", "a", "ab", "ab", "b", "ab"], 100);
        assert_eq!(&v.tokens()[..4], &[PAD, UNK, CLS, SEP]);
        assert!(v.contains("##a") && v.contains("a"));
        assert!(v.id("ab").is_some());
    }
}
