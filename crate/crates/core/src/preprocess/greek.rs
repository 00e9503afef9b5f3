//! Greek lowercasing and diacritic removal.

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

fn is_greek(c: char) -> bool {
    matches!(c, '\u{0370}'..='\u{03FF}' | '\u{1F00}'..='\u{1FFF}')
}

/// Lowercases (word-final Σ becomes ς), decomposes, drops combining marks
/// that sit on Greek letters, then recomposes. Marks on other scripts are
/// kept.
pub fn normalize_greek(text: &str) -> String {
    let lower = text.to_lowercase();
    let mut stripped = String::with_capacity(lower.len());
    let mut on_greek = false;
    for c in lower.nfd() {
        if is_combining_mark(c) {
            if on_greek {
                continue;
            }
        } else {
            on_greek = is_greek(c);
        }
        stripped.push(c);
    }
    stripped.nfc().collect()
}
