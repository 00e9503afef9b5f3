//! Basic pre-tokenization, greedy longest-match-first WordPiece, and
//! fixed-length encoding.

use serde::{Deserialize, Serialize};
use unicode_properties::{GeneralCategoryGroup, UnicodeGeneralCategory};

use super::vocab::{Vocabulary, CONTINUATION, UNK};
use crate::corpus::Label;

/// Words longer than this many characters become a single `[UNK]`.
pub const MAX_WORD_CHARS: usize = 100;

pub const DEFAULT_MAX_LEN: usize = 64;

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation() || c.general_category_group() == GeneralCategoryGroup::Punctuation
}

/// Splits on whitespace, then splits every punctuation character into its
/// own word.
pub fn basic_tokenize(text: &str) -> Vec<String> {
    let mut words = Vec::new();
    for chunk in text.split_whitespace() {
        let mut current = String::new();
        for c in chunk.chars() {
            if is_punctuation(c) {
                if !current.is_empty() {
                    words.push(std::mem::take(&mut current));
                }
                words.push(c.to_string());
            } else if !c.is_control() {
                current.push(c);
            }
        }
        if !current.is_empty() {
            words.push(current);
        }
    }
    words
}

/// Greedy longest-prefix segmentation of one word. Returns `[UNK]` alone
/// when any remainder has no matching piece.
pub fn wordpiece_word(word: &str, vocab: &Vocabulary) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    if chars.len() > MAX_WORD_CHARS {
        return vec![UNK.to_string()];
    }
    let mut pieces = Vec::new();
    let mut start = 0;
    let mut candidate = String::new();
    while start < chars.len() {
        let mut found = None;
        for end in (start + 1..=chars.len()).rev() {
            candidate.clear();
            if start > 0 {
                candidate.push_str(CONTINUATION);
            }
            candidate.extend(&chars[start..end]);
            if vocab.contains(&candidate) {
                found = Some(end);
                break;
            }
        }
        match found {
            Some(end) => {
                pieces.push(candidate.clone());
                start = end;
            }
            None => return vec![UNK.to_string()],
        }
    }
    pieces
}

pub fn wordpiece_tokenize(text: &str, vocab: &Vocabulary) -> Vec<String> {
    basic_tokenize(text).iter().flat_map(|w| wordpiece_word(w, vocab)).collect()
}

/// Reverses WordPiece on a token sequence: `##` pieces are glued to the
/// previous token, other tokens are space-separated.
pub fn detokenize(tokens: &[String]) -> String {
    let mut out = String::new();
    for t in tokens {
        match t.strip_prefix(CONTINUATION) {
            Some(rest) if !out.is_empty() => out.push_str(rest),
            _ => {
                if !out.is_empty() {
                    out.push(' ');
                }
                out.push_str(t);
            }
        }
    }
    out
}

/// Fixed-length model input: `[CLS] tokens… [SEP] [PAD]…`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedExample {
    pub ids: Vec<u32>,
    pub mask: Vec<bool>,
    pub label: Option<Label>,
}

impl TokenizedExample {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Number of unmasked positions.
    pub fn real_len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Position ids as `usize`, for embedding lookups.
    pub fn positions(&self) -> Vec<usize> {
        self.ids.iter().map(|&i| i as usize).collect()
    }

    /// Checks the structural invariants against a vocabulary.
    pub fn is_well_formed(&self, vocab: &Vocabulary, max_len: usize) -> bool {
        let n = self.real_len();
        self.ids.len() == max_len
            && self.mask.len() == max_len
            && n >= 2
            && self.mask[..n].iter().all(|&m| m)
            && self.mask[n..].iter().all(|&m| !m)
            && self.ids[0] == vocab.cls_id()
            && self.ids[n - 1] == vocab.sep_id()
            && self.ids[n..].iter().all(|&i| i == vocab.pad_id())
    }
}

/// Wraps tokens in `[CLS]`/`[SEP]`, truncating from the right so the total
/// fits `max_len`, then pads to exactly `max_len`. Unknown tokens map to
/// `[UNK]`. Panics if `max_len < 3`.
pub fn encode(tokens: &[String], vocab: &Vocabulary, max_len: usize, label: Option<Label>) -> TokenizedExample {
    assert!(max_len >= 3, "max_len must be at least 3");
    let keep = tokens.len().min(max_len - 2);
    let mut ids = Vec::with_capacity(max_len);
    ids.push(vocab.cls_id());
    ids.extend(tokens[..keep].iter().map(|t| vocab.id(t).unwrap_or(vocab.unk_id())));
    ids.push(vocab.sep_id());
    let real = ids.len();
    ids.resize(max_len, vocab.pad_id());
    let mask = (0..max_len).map(|i| i < real).collect();
    TokenizedExample { ids, mask, label }
}
