//! Tokenization and text normalization.
//!
//! The engine uses a single reproducible tokenizer for every budget and
//! count: a token is a maximal run of Unicode alphanumeric characters, and
//! tokens are lowercased when compared or counted. Budgets expressed in
//! tokens ("first 1024 tokens") are always measured with this tokenizer.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use sha2::{Digest, Sha256};

/// Byte ranges of the tokens in `text`, in order.
pub fn token_spans(text: &str) -> TokenSpans<'_> {
    TokenSpans { text, pos: 0 }
}

/// Iterator over `(start, end)` byte offsets of tokens.
#[derive(Debug, Clone)]
pub struct TokenSpans<'a> {
    text: &'a str,
    pos: usize,
}

impl Iterator for TokenSpans<'_> {
    type Item = (usize, usize);

    fn next(&mut self) -> Option<Self::Item> {
        let rest = &self.text[self.pos..];
        let mut start = None;
        for (i, c) in rest.char_indices() {
            match (start, c.is_alphanumeric()) {
                (None, true) => start = Some(i),
                (Some(s), false) => {
                    self.pos += i;
                    return Some((self.pos - i + s, self.pos));
                }
                _ => {}
            }
        }
        let s = start?;
        let base = self.pos;
        self.pos = self.text.len();
        Some((base + s, self.text.len()))
    }
}

/// Lowercased tokens of `text`.
pub fn tokenize(text: &str) -> Vec<String> {
    token_spans(text).map(|(s, e)| text[s..e].to_lowercase()).collect()
}

pub fn token_count(text: &str) -> usize {
    token_spans(text).count()
}

/// The shortest prefix of `text` containing its first `budget` tokens.
///
/// When `text` has no more than `budget` tokens it is returned whole, so the
/// result always tokenizes to the first `min(budget, token_count)` tokens.
pub fn truncate_tokens(text: &str, budget: usize) -> &str {
    if budget == 0 {
        return "";
    }
    match token_spans(text).nth(budget) {
        // there is a (budget+1)-th token: cut after the budget-th one
        Some(_) => {
            let (_, end) = token_spans(text).nth(budget - 1).expect("token exists");
            &text[..end]
        }
        None => text,
    }
}

/// Collapse whitespace runs to a single space, drop control characters and
/// trim both ends.
pub fn normalize_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars() {
        if c.is_whitespace() {
            pending_space = true;
        } else if c.is_control() {
            continue;
        } else {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        }
    }
    out
}

const INLINE_TAGS: &[&str] = &[
    "a", "abbr", "b", "bdi", "bdo", "cite", "code", "data", "dfn", "em", "font", "i", "kbd", "mark", "q", "s", "samp",
    "small", "span", "strong", "sub", "sup", "time", "u", "var",
];

const SKIPPED_ELEMENTS: &[&str] = &["script", "style", "noscript", "template", "head"];

/// Extract visible text from an HTML fragment.
///
/// Tags are removed (block-level tags become a space, inline tags vanish),
/// comments and the contents of `script`/`style`-like elements are dropped,
/// and common character references are decoded. The result is not
/// whitespace-normalized; pass it through [`normalize_text`].
pub fn strip_html(html: &str) -> String {
    let mut out = String::with_capacity(html.len());
    let bytes = html.as_bytes();
    let mut i = 0;
    while i < html.len() {
        let c = bytes[i];
        if c == b'<' {
            if html[i..].starts_with("<!--") {
                i = match html[i + 4..].find("-->") {
                    Some(p) => i + 4 + p + 3,
                    None => html.len(),
                };
                continue;
            }
            let Some(close) = html[i..].find('>') else {
                // a lone '<' is text
                out.push('<');
                i += 1;
                continue;
            };
            let tag = &html[i + 1..i + close];
            let name = tag_name(tag);
            i += close + 1;
            if !tag.starts_with('/') && SKIPPED_ELEMENTS.contains(&name.as_str()) {
                let end_tag = alloc::format!("</{name}");
                i = match find_ascii_ci(&html[i..], &end_tag) {
                    Some(p) => match html[i + p..].find('>') {
                        Some(q) => i + p + q + 1,
                        None => html.len(),
                    },
                    None => html.len(),
                };
                out.push(' ');
                continue;
            }
            if !INLINE_TAGS.contains(&name.as_str()) {
                out.push(' ');
            }
        } else if c == b'&' {
            let (decoded, used) = decode_entity(&html[i..]);
            match decoded {
                Some(ch) => out.push(ch),
                None => out.push('&'),
            }
            i += used;
        } else {
            let ch = html[i..].chars().next().expect("in bounds");
            out.push(ch);
            i += ch.len_utf8();
        }
    }
    out
}

fn tag_name(tag: &str) -> String {
    tag.trim_start_matches('/')
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

fn find_ascii_ci(haystack: &str, needle: &str) -> Option<usize> {
    let h = haystack.as_bytes();
    let n = needle.as_bytes();
    if n.len() > h.len() {
        return None;
    }
    (0..=h.len() - n.len()).find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}

/// Decode a character reference at the start of `s`. Returns the decoded
/// char (if recognised) and the number of bytes consumed.
fn decode_entity(s: &str) -> (Option<char>, usize) {
    let Some(semi) = s[..s.len().min(12)].find(';') else {
        return (None, 1);
    };
    let body = &s[1..semi];
    let named = match body {
        "amp" => Some('&'),
        "lt" => Some('<'),
        "gt" => Some('>'),
        "quot" => Some('"'),
        "apos" => Some('\''),
        "nbsp" => Some(' '),
        _ => None,
    };
    if named.is_some() {
        return (named, semi + 1);
    }
    let numeric = if let Some(hex) = body.strip_prefix("#x").or_else(|| body.strip_prefix("#X")) {
        u32::from_str_radix(hex, 16).ok()
    } else if let Some(dec) = body.strip_prefix('#') {
        dec.parse::<u32>().ok()
    } else {
        None
    };
    match numeric.and_then(char::from_u32) {
        Some(ch) => (Some(ch), semi + 1),
        None => (None, 1),
    }
}

/// Lowercase hex SHA-256 of `text`.
pub fn content_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Case-insensitive, whitespace-normalized form used to deduplicate queries.
pub fn query_key(text: &str) -> String {
    normalize_text(text).to_lowercase()
}
