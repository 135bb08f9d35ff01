//! Shared tokenization: URLs stripped, Unicode word boundaries.

use regex::Regex;
use std::sync::OnceLock;

fn url_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\bhttps?://\S+|\bwww\.\S+").unwrap())
}

fn word_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[\w']+").unwrap())
}

/// Tokens in original case, word-boundary split, URLs removed.
pub fn tokenize(text: &str) -> Vec<String> {
    let stripped = url_re().replace_all(text, " ");
    word_re()
        .find_iter(&stripped)
        .map(|m| m.as_str().to_string())
        .collect()
}

/// Lowercased tokens.
pub fn tokenize_lower(text: &str) -> Vec<String> {
    tokenize(text).into_iter().map(|t| t.to_lowercase()).collect()
}
