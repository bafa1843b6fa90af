//! Exact Match scoring with the usual open-domain QA normalization:
//! lowercase, drop punctuation, drop the articles a/an/the, collapse
//! whitespace.

use alloc::string::String;
use alloc::vec::Vec;

pub fn normalize_answer(s: &str) -> String {
    let lowered = s.to_lowercase();
    let no_punct: String = lowered
        .chars()
        .filter(|c| !(c.is_ascii_punctuation() || is_unicode_punctuation(*c)))
        .collect();
    let words: Vec<&str> = no_punct
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .collect();
    words.join(" ")
}

fn is_unicode_punctuation(c: char) -> bool {
    matches!(
        c,
        '\u{2010}'..='\u{2027}' | '\u{2030}'..='\u{205E}' | '\u{00A1}' | '\u{00A7}' | '\u{00AB}' | '\u{00B6}' | '\u{00B7}' | '\u{00BB}' | '\u{00BF}'
    )
}

/// 1.0 when the normalized strings are equal and non-empty, else 0.0.
pub fn exact_match(prediction: &str, gold: &str) -> f64 {
    let p = normalize_answer(prediction);
    if !p.is_empty() && p == normalize_answer(gold) {
        1.0
    } else {
        0.0
    }
}
