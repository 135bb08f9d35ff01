//! Rule-based sentiment intensity scoring over a valence lexicon.
//!
//! Mirrors the published VADER heuristics: negation flip, booster offsets,
//! all-caps emphasis, exclamation emphasis, and the s/sqrt(s^2+15)
//! normalization.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::Path;

use super::tokenize::tokenize;
use super::TextScoreError;

const NEGATION_FLIP: f64 = -0.74;
const CAPS_EMPHASIS: f64 = 0.733;
const EXCLAMATION_EMPHASIS: f64 = 0.292;
const MAX_EXCLAMATIONS: usize = 4;
const NORMALIZATION_ALPHA: f64 = 15.0;
const NEGATION_SCOPE: usize = 3;

#[derive(Debug, Clone, Default)]
pub struct ValenceLexicon {
    /// token -> valence in [-4, 4]
    pub entries: BTreeMap<String, f64>,
    /// token -> additive emphasis offset applied to the next scored token
    pub boosters: BTreeMap<String, f64>,
    pub negators: BTreeSet<String>,
}

impl ValenceLexicon {
    /// Parse a valence file: one `token<TAB>valence` entry per line.
    /// Lines starting with `#` are comments.
    pub fn parse_valences<R: BufRead>(&mut self, reader: R) -> Result<(), TextScoreError> {
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut parts = trimmed.splitn(2, '\t');
            let token = parts.next().unwrap_or_default();
            let valence: f64 = parts
                .next()
                .ok_or_else(|| TextScoreError::LexiconParse {
                    line: lineno + 1,
                    message: "missing tab-separated valence".into(),
                })?
                .trim()
                .parse()
                .map_err(|e| TextScoreError::LexiconParse {
                    line: lineno + 1,
                    message: format!("bad valence: {e}"),
                })?;
            self.entries.insert(token.to_lowercase(), valence);
        }
        Ok(())
    }

    pub fn parse_boosters<R: BufRead>(&mut self, reader: R) -> Result<(), TextScoreError> {
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut parts = trimmed.splitn(2, '\t');
            let token = parts.next().unwrap_or_default();
            let offset: f64 = parts
                .next()
                .ok_or_else(|| TextScoreError::LexiconParse {
                    line: lineno + 1,
                    message: "missing tab-separated offset".into(),
                })?
                .trim()
                .parse()
                .map_err(|e| TextScoreError::LexiconParse {
                    line: lineno + 1,
                    message: format!("bad offset: {e}"),
                })?;
            self.boosters.insert(token.to_lowercase(), offset);
        }
        Ok(())
    }

    pub fn parse_negators<R: BufRead>(&mut self, reader: R) -> Result<(), TextScoreError> {
        for line in reader.lines() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            self.negators.insert(trimmed.to_lowercase());
        }
        Ok(())
    }

    pub fn load(
        valences: &Path,
        boosters: Option<&Path>,
        negators: Option<&Path>,
    ) -> Result<Self, TextScoreError> {
        let mut lex = ValenceLexicon::default();
        lex.parse_valences(std::io::BufReader::new(std::fs::File::open(valences)?))?;
        if let Some(p) = boosters {
            lex.parse_boosters(std::io::BufReader::new(std::fs::File::open(p)?))?;
        }
        if let Some(p) = negators {
            lex.parse_negators(std::io::BufReader::new(std::fs::File::open(p)?))?;
        }
        Ok(lex)
    }
}

fn is_all_caps(token: &str) -> bool {
    token.chars().any(|c| c.is_alphabetic())
        && token.chars().filter(|c| c.is_alphabetic()).all(|c| c.is_uppercase())
}

/// Compound sentiment score of a post body, in [-1, 1].
pub fn score_sentiment(body: &str, lexicon: &ValenceLexicon) -> f64 {
    let tokens = tokenize(body);
    if tokens.is_empty() {
        return 0.0;
    }
    // Caps emphasis only applies amid mixed-case text.
    let mixed_case = !tokens.iter().all(|t| is_all_caps(t));

    let lower: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
    let mut sum = 0.0;
    for (i, tok) in lower.iter().enumerate() {
        let Some(&base) = lexicon.entries.get(tok) else {
            continue;
        };
        let mut valence = base;
        if mixed_case && is_all_caps(&tokens[i]) {
            valence += CAPS_EMPHASIS * valence.signum();
        }
        if i > 0 {
            if let Some(&offset) = lexicon.boosters.get(&lower[i - 1]) {
                valence += offset * valence.signum();
            }
        }
        let negated = lower[..i]
            .iter()
            .rev()
            .take(NEGATION_SCOPE)
            .any(|t| lexicon.negators.contains(t));
        if negated {
            valence *= NEGATION_FLIP;
        }
        sum += valence;
    }

    if sum != 0.0 {
        let bangs = body.chars().filter(|&c| c == '!').count().min(MAX_EXCLAMATIONS);
        sum += bangs as f64 * EXCLAMATION_EMPHASIS * sum.signum();
    }

    sum / (sum * sum + NORMALIZATION_ALPHA).sqrt()
}
