//! Hashtag segmentation.
//!
//! A hashtag is a run of `#` that starts the text or follows a character
//! which is neither alphanumeric nor `_`, immediately followed by a body of
//! the form `alnum+ (_+ alnum+)*`. Latin-script bodies are split into words
//! at underscores, lower→upper transitions, letter↔digit transitions and
//! before the last capital of an uppercase run that precedes a lowercase
//! letter (`ABCDef` → `ABC Def`). Other scripts only lose the `#`.

fn is_body(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn is_latin_letter(c: char) -> bool {
    c.is_ascii_alphabetic()
        || matches!(c, '\u{00C0}'..='\u{024F}' | '\u{1E00}'..='\u{1EFF}') && c != '\u{00D7}' && c != '\u{00F7}'
}

/// End (exclusive) of the hashtag body starting at `start`.
fn body_end(chars: &[char], start: usize) -> usize {
    let mut end = start;
    while end < chars.len() && chars[end].is_alphanumeric() {
        end += 1;
    }
    loop {
        let mut k = end;
        while k < chars.len() && chars[k] == '_' {
            k += 1;
        }
        if k == end || k >= chars.len() || !chars[k].is_alphanumeric() {
            return end;
        }
        end = k;
        while end < chars.len() && chars[end].is_alphanumeric() {
            end += 1;
        }
    }
}

/// Splits a Latin hashtag body into words.
pub fn split_words(body: &str) -> Vec<String> {
    let mut words = Vec::new();
    for part in body.split('_').filter(|p| !p.is_empty()) {
        let chars: Vec<char> = part.chars().collect();
        let mut current = String::new();
        for (i, &c) in chars.iter().enumerate() {
            if i > 0 {
                let prev = chars[i - 1];
                let next = chars.get(i + 1).copied();
                let boundary = (prev.is_lowercase() && c.is_uppercase())
                    || (prev.is_alphabetic() && c.is_numeric())
                    || (prev.is_numeric() && c.is_alphabetic())
                    || (prev.is_uppercase() && c.is_uppercase() && next.is_some_and(char::is_lowercase));
                if boundary && !current.is_empty() {
                    words.push(std::mem::take(&mut current));
                }
            }
            current.push(c);
        }
        if !current.is_empty() {
            words.push(current);
        }
    }
    words
}

pub fn segment_hashtags(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < chars.len() {
        if chars[i] != '#' {
            out.push(chars[i]);
            i += 1;
            continue;
        }
        let mut j = i;
        while j < chars.len() && chars[j] == '#' {
            j += 1;
        }
        let starts_token = i == 0 || !is_body(chars[i - 1]);
        if !(starts_token && j < chars.len() && chars[j].is_alphanumeric()) {
            out.extend(&chars[i..j]);
            i = j;
            continue;
        }
        let end = body_end(&chars, j);
        let body: String = chars[j..end].iter().collect();
        if body.chars().filter(|c| c.is_alphabetic()).all(is_latin_letter) {
            out.push_str(&split_words(&body).join(" "));
        } else {
            out.push_str(&body);
        }
        i = end;
    }
    out
}
