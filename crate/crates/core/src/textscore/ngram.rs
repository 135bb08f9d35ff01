//! Add-k smoothed n-gram language model with UNK thresholding and backoff,
//! used to measure how typical a user's language is for the community.

use std::collections::HashMap;

use super::tokenize::tokenize_lower;
use super::TextScoreError;

const UNK: u32 = 0;
/// Tokens seen fewer than this many times in training map to UNK.
const MIN_TOKEN_FREQ: u32 = 2;

#[derive(Debug, Clone, Default)]
struct ContextCounts {
    tokens: HashMap<u32, u32>,
    total: u32,
}

#[derive(Debug, Clone)]
pub struct NgramModel {
    pub order: usize,
    pub smoothing_constant: f64,
    vocab: HashMap<String, u32>,
    /// Per context length 0..order-1: context -> counts.
    counts: Vec<HashMap<Vec<u32>, ContextCounts>>,
}

impl NgramModel {
    /// Number of known token types, excluding UNK.
    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn token_id(&self, token: &str) -> u32 {
        self.vocab.get(token).copied().unwrap_or(UNK)
    }

    /// P(token | context), backing off to the longest context with observed
    /// counts, add-k smoothed over vocabulary + UNK.
    fn prob_ids(&self, context: &[u32], token: u32) -> f64 {
        let k = self.smoothing_constant;
        let classes = (self.vocab_size() + 1) as f64;
        let max_len = (self.order - 1).min(context.len());
        for len in (0..=max_len).rev() {
            let ctx = &context[context.len() - len..];
            if let Some(cc) = self.counts[len].get(ctx) {
                if cc.total > 0 {
                    let c = cc.tokens.get(&token).copied().unwrap_or(0) as f64;
                    return (c + k) / (cc.total as f64 + k * classes);
                }
            }
        }
        // No observed unigram context can only happen on an empty model.
        k / (k * classes)
    }

    /// P(token | context) over string tokens.
    pub fn prob(&self, context: &[&str], token: &str) -> f64 {
        let ctx: Vec<u32> = context.iter().map(|t| self.token_id(t)).collect();
        self.prob_ids(&ctx, self.token_id(token))
    }

    /// Per-token log2 probabilities of a post body; contexts reset per post.
    fn post_log2_probs(&self, body: &str) -> Vec<f64> {
        let ids: Vec<u32> = tokenize_lower(body).iter().map(|t| self.token_id(t)).collect();
        let mut out = Vec::with_capacity(ids.len());
        for i in 0..ids.len() {
            let start = i.saturating_sub(self.order - 1);
            let p = self.prob_ids(&ids[start..i], ids[i]);
            out.push(p.log2());
        }
        out
    }
}

/// Train an add-k n-gram model. Tokens below the frequency threshold map to
/// UNK; counts are kept for every context length up to `order - 1` so scoring
/// can back off through unseen contexts.
pub fn train_ngram(
    training_posts: &[impl AsRef<str>],
    order: usize,
    smoothing_constant: f64,
) -> Result<NgramModel, TextScoreError> {
    assert!(order >= 1, "order must be >= 1");
    assert!(smoothing_constant > 0.0, "smoothing constant must be positive");

    let tokenized: Vec<Vec<String>> = training_posts
        .iter()
        .map(|p| tokenize_lower(p.as_ref()))
        .filter(|t| !t.is_empty())
        .collect();
    if tokenized.is_empty() {
        return Err(TextScoreError::EmptyTrainingSet);
    }

    let mut freq: HashMap<&str, u32> = HashMap::new();
    for post in &tokenized {
        for tok in post {
            *freq.entry(tok.as_str()).or_insert(0) += 1;
        }
    }
    let mut kept: Vec<&str> = freq
        .iter()
        .filter(|(_, &c)| c >= MIN_TOKEN_FREQ)
        .map(|(&t, _)| t)
        .collect();
    kept.sort_unstable();
    let vocab: HashMap<String, u32> = kept
        .iter()
        .enumerate()
        .map(|(i, t)| (t.to_string(), (i + 1) as u32))
        .collect();

    let mut counts: Vec<HashMap<Vec<u32>, ContextCounts>> = vec![HashMap::new(); order];
    for post in &tokenized {
        let ids: Vec<u32> = post
            .iter()
            .map(|t| vocab.get(t.as_str()).copied().unwrap_or(UNK))
            .collect();
        for i in 0..ids.len() {
            let max_len = (order - 1).min(i);
            for len in 0..=max_len {
                let ctx = ids[i - len..i].to_vec();
                let cc = counts[len].entry(ctx).or_default();
                *cc.tokens.entry(ids[i]).or_insert(0) += 1;
                cc.total += 1;
            }
        }
    }

    Ok(NgramModel { order, smoothing_constant, vocab, counts })
}

/// Cross-entropy of `posts` under `model`, in bits per token. Contexts reset
/// at post boundaries. Returns `None` when the posts contain no scorable
/// tokens.
pub fn cross_entropy(posts: &[impl AsRef<str>], model: &NgramModel) -> Option<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for post in posts {
        for lp in model.post_log2_probs(post.as_ref()) {
            total += lp;
            n += 1;
        }
    }
    if n == 0 {
        None
    } else {
        Some(-total / n as f64)
    }
}
