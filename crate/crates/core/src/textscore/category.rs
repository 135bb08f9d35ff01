//! Category word-proportion scoring (anger / anxiety dictionaries).

use std::collections::BTreeSet;
use std::io::BufRead;
use std::path::Path;

use super::tokenize::tokenize_lower;
use super::TextScoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Anger,
    Anxiety,
}

/// A set of lowercase token stems; a terminal `*` marks a prefix wildcard.
#[derive(Debug, Clone)]
pub struct CategoryLexicon {
    pub category: Category,
    exact: BTreeSet<String>,
    prefixes: Vec<String>,
}

impl CategoryLexicon {
    pub fn new(category: Category, stems: impl IntoIterator<Item = String>) -> Self {
        let mut exact = BTreeSet::new();
        let mut prefixes = Vec::new();
        for stem in stems {
            let stem = stem.to_lowercase();
            if let Some(prefix) = stem.strip_suffix('*') {
                prefixes.push(prefix.to_string());
            } else {
                exact.insert(stem);
            }
        }
        prefixes.sort();
        prefixes.dedup();
        CategoryLexicon { category, exact, prefixes }
    }

    /// One stem per line; `#` comments and blank lines ignored.
    pub fn parse<R: BufRead>(category: Category, reader: R) -> Result<Self, TextScoreError> {
        let mut stems = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            stems.push(trimmed.to_string());
        }
        Ok(CategoryLexicon::new(category, stems))
    }

    pub fn load(category: Category, path: &Path) -> Result<Self, TextScoreError> {
        Self::parse(category, std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn matches(&self, token: &str) -> bool {
        self.exact.contains(token) || self.prefixes.iter().any(|p| token.starts_with(p.as_str()))
    }

    pub fn is_empty(&self) -> bool {
        self.exact.is_empty() && self.prefixes.is_empty()
    }
}

/// Proportion of tokens matching the category lexicon, in [0, 1].
pub fn score_category(body: &str, lexicon: &CategoryLexicon) -> f64 {
    let tokens = tokenize_lower(body);
    if tokens.is_empty() {
        return 0.0;
    }
    let matched = tokens.iter().filter(|t| lexicon.matches(t)).count();
    matched as f64 / tokens.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex(stems: &[&str]) -> CategoryLexicon {
        CategoryLexicon::new(Category::Anger, stems.iter().map(|s| s.to_string()))
    }

    #[test]
    fn ratio_of_matches() {
        let l = lex(&["hate", "rage"]);
        assert_eq!(score_category("i hate this and i rage a lot ok now", &l), 0.2);
    }

    #[test]
    fn no_matches_is_zero() {
        assert_eq!(score_category("calm words only", &lex(&["hate"])), 0.0);
        assert_eq!(score_category("", &lex(&["hate"])), 0.0);
    }

    #[test]
    fn wildcard_prefix_matches() {
        let l = lex(&["furi*"]);
        assert_eq!(score_category("he was furious about that", &l), 0.2);
        assert_eq!(score_category("fur coats are warm here too", &l), 0.0);
    }
}
