//! Per-post text scoring: lexicon sentiment, anger/anxiety category
//! proportions, toxicity, and the community n-gram language model used for
//! coherence cross-entropy.

pub mod category;
pub mod ngram;
pub mod sentiment;
pub mod tokenize;
pub mod toxicity;

pub use category::{score_category, CategoryLexicon};
pub use ngram::{cross_entropy, train_ngram, NgramModel};
pub use sentiment::{score_sentiment, ValenceLexicon};
pub use toxicity::{score_toxicity, ToxicityMode, ToxicityScorer, ToxicityScorerConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TextScoreError {
    #[error("empty training set for language model")]
    EmptyTrainingSet,
    #[error("lexicon parse error at line {line}: {message}")]
    LexiconParse { line: usize, message: String },
    #[error("toxicity service error: {0}")]
    Service(String),
    #[error("toxicity mode requires {0}")]
    MissingInput(&'static str),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
