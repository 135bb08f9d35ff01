//! Per-user feature assembly: reflection scores, interest diversity,
//! engagement with similar communities, connection features, coherence, and
//! activity controls, plus the standardized model matrix.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::corpus::{Corpus, CorpusConfig, MigrationLabel, UserActivity};
use crate::textscore::{
    cross_entropy, score_category, score_sentiment, CategoryLexicon, NgramModel, ToxicityScorer,
    ValenceLexicon,
};

const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("no retained users with complete features")]
    EmptyMatrix,
    #[error("column {0:?} is constant; cannot standardize")]
    ConstantColumn(String),
    #[error("feature {0:?} is not a model column")]
    UnknownFeature(String),
}

/// Canonical feature column order (paper table order).
pub const FEATURE_NAMES: [&str; 13] = [
    "tox", "emo", "ang", "anx", "div", "eng", "ppb", "apb", "sen", "dvi", "coherence", "n_posts",
    "seniority",
];

/// Index of the exclusion-restriction column within `FEATURE_NAMES`.
pub const COHERENCE_INDEX: usize = 10;

#[derive(Debug, Clone, Default)]
pub struct FeatureVector {
    pub user: String,
    pub tox: Option<f64>,
    pub emo: Option<f64>,
    pub ang: Option<f64>,
    pub anx: Option<f64>,
    pub div: Option<f64>,
    pub eng: Option<f64>,
    pub dvi: Option<f64>,
    pub sen: Option<f64>,
    pub apb: Option<f64>,
    pub ppb: Option<f64>,
    pub coherence: Option<f64>,
    pub n_posts: u32,
    pub seniority: Option<f64>,
}

impl FeatureVector {
    /// Values in canonical column order; `None` marks a missing field.
    pub fn values(&self) -> [Option<f64>; 13] {
        [
            self.tox,
            self.emo,
            self.ang,
            self.anx,
            self.div,
            self.eng,
            self.ppb,
            self.apb,
            self.sen,
            self.dvi,
            self.coherence,
            Some(self.n_posts as f64),
            self.seniority,
        ]
    }
}

/// Gini coefficient over the nonzero per-community post counts.
///
/// Computed as the normalized mean absolute difference. A single community
/// yields 0; `None` for an empty mapping.
pub fn diversity(per_community_counts: &BTreeMap<String, u32>) -> Option<f64> {
    let counts: Vec<f64> = per_community_counts
        .values()
        .filter(|&&c| c > 0)
        .map(|&c| c as f64)
        .collect();
    gini(&counts)
}

/// Gini of a nonempty positive sample; `None` when empty.
pub fn gini(counts: &[f64]) -> Option<f64> {
    let n = counts.len();
    if n == 0 {
        return None;
    }
    let total: f64 = counts.iter().sum();
    if total == 0.0 {
        return Some(0.0);
    }
    let mut sorted = counts.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // Equivalent to sum_i sum_j |x_i - x_j| / (2 n^2 mu).
    let weighted: f64 = sorted.iter().enumerate().map(|(i, &x)| (i + 1) as f64 * x).sum();
    Some((2.0 * weighted) / (n as f64 * total) - (n as f64 + 1.0) / n as f64)
}

/// Weighted engagement with communities similar to the focal one.
///
/// `(sum over j != focal of n_j * sim_j) / |P_i|` with `|P_i|` the user's
/// total pre-ban post count. Communities absent from the similarity table
/// contribute 0 and are tallied in `uncovered`.
#[derive(Debug, Clone, Copy, Default)]
pub struct EngagementDiag {
    pub uncovered_communities: u32,
}

pub fn engagement(
    activity: &UserActivity,
    similarity_table: &BTreeMap<String, f64>,
    focal: &str,
    diag: &mut EngagementDiag,
) -> Option<f64> {
    let total: u32 = activity.per_community_counts.values().sum();
    if total == 0 {
        return None;
    }
    let mut sum = 0.0;
    for (community, &count) in &activity.per_community_counts {
        if community == focal {
            continue;
        }
        match similarity_table.get(community) {
            Some(&sim) => sum += count as f64 * sim,
            None => diag.uncovered_communities += 1,
        }
    }
    Some(sum / total as f64)
}

/// Days from the user's first focal-community post to the ban.
pub fn account_age_days(activity: &UserActivity, config: &CorpusConfig) -> Option<f64> {
    let first = activity.first_focal_post_at?;
    Some((config.ban_time - first) as f64 / SECONDS_PER_DAY)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ConnectionFeatures {
    pub dvi: Option<f64>,
    pub sen: Option<f64>,
    pub apb: Option<f64>,
    pub ppb: Option<f64>,
}

/// Connection features from the reply-dyad and thread indexes.
///
/// `div_of` must hold every user's precomputed diversity (two-phase
/// pipeline: all DIVs first, then DVI).
pub fn connection_features(
    user: &str,
    corpus: &Corpus,
    config: &CorpusConfig,
    pre_ban_migrated: &BTreeSet<String>,
    div_of: &BTreeMap<String, f64>,
) -> ConnectionFeatures {
    let Some(activity) = corpus.users.get(user) else {
        return ConnectionFeatures::default();
    };
    let mut out = ConnectionFeatures::default();

    let neighbors = &activity.reply_dyads;
    if !neighbors.is_empty() {
        let n = neighbors.len() as f64;
        let mut dvi_sum = 0.0;
        let mut dvi_count = 0usize;
        let mut sen_sum = 0.0;
        let mut sen_defined = true;
        let alpha_i = account_age_or_first_post(activity, corpus, config);
        for (peer, &weight) in neighbors {
            if let Some(&div) = div_of.get(peer) {
                dvi_sum += weight as f64 * div;
                dvi_count += 1;
            }
            match (
                alpha_i,
                corpus.users.get(peer).and_then(|p| account_age_or_first_post(p, corpus, config)),
            ) {
                (Some(ai), Some(aj)) => sen_sum += weight as f64 * (ai - aj),
                _ => sen_defined = false,
            }
        }
        if dvi_count == neighbors.len() {
            out.dvi = Some(dvi_sum / n);
        }
        if sen_defined {
            out.sen = Some(sen_sum / n);
        }

        let total_events: u32 = neighbors.values().sum();
        let migrated_events: u32 = neighbors
            .iter()
            .filter(|(peer, _)| pre_ban_migrated.contains(peer.as_str()))
            .map(|(_, &w)| w)
            .sum();
        if total_events > 0 {
            out.apb = Some(migrated_events as f64 / total_events as f64);
        }
    }

    if !activity.thread_ids.is_empty() {
        let with_migrated = activity
            .thread_ids
            .iter()
            .filter(|t| {
                corpus
                    .thread_members
                    .get(t.as_str())
                    .map(|members| {
                        members.iter().any(|m| m != user && pre_ban_migrated.contains(m))
                    })
                    .unwrap_or(false)
            })
            .count();
        out.ppb = Some(with_migrated as f64 / activity.thread_ids.len() as f64);
    }

    out
}

/// Account age from the first focal post, falling back to the first pre-ban
/// post anywhere for users who never posted in the focal community.
fn account_age_or_first_post(
    activity: &UserActivity,
    corpus: &Corpus,
    config: &CorpusConfig,
) -> Option<f64> {
    if let Some(age) = account_age_days(activity, config) {
        return Some(age);
    }
    corpus
        .posts
        .iter()
        .filter(|p| {
            p.author.as_deref() == Some(activity.user.as_str())
                && p.platform == crate::corpus::Platform::Mainstream
        })
        .map(|p| p.created_utc)
        .min()
        .map(|t| (config.ban_time - t) as f64 / SECONDS_PER_DAY)
}

/// Scorers and models required to compute per-user text features.
pub struct TextScorers<'a> {
    pub valence: &'a ValenceLexicon,
    pub anger: &'a CategoryLexicon,
    pub anxiety: &'a CategoryLexicon,
    pub toxicity: &'a ToxicityScorer,
    /// Community language model plus the ids of the posts it was trained on
    /// (excluded from coherence scoring).
    pub language_model: &'a NgramModel,
    pub training_post_ids: &'a BTreeSet<String>,
}

/// Reflection features: per-post score means over scorable pre-ban posts.
pub fn reflection_features(
    user: &str,
    corpus: &Corpus,
    config: &CorpusConfig,
    scorers: &TextScorers<'_>,
) -> (Option<f64>, Option<f64>, Option<f64>, Option<f64>) {
    let posts: Vec<&crate::corpus::Post> = corpus.scorable_pre_ban_posts(user, config).collect();
    if posts.is_empty() {
        return (None, None, None, None);
    }
    let n = posts.len() as f64;
    let emo = posts.iter().map(|p| score_sentiment(&p.body, scorers.valence)).sum::<f64>() / n;
    let ang = posts.iter().map(|p| score_category(&p.body, scorers.anger)).sum::<f64>() / n;
    let anx = posts.iter().map(|p| score_category(&p.body, scorers.anxiety)).sum::<f64>() / n;

    // Posts whose toxicity scoring fails are excluded from the TOX mean.
    let mut tox_sum = 0.0;
    let mut tox_n = 0usize;
    for post in &posts {
        if let Ok(score) = scorers.toxicity.score(&post.body, post.toxicity) {
            tox_sum += score;
            tox_n += 1;
        }
    }
    let tox = if tox_n > 0 { Some(tox_sum / tox_n as f64) } else { None };
    (tox, Some(emo), Some(ang), Some(anx))
}

/// Compute the full feature vector set for all users in `labels`.
pub fn compute_features(
    corpus: &Corpus,
    config: &CorpusConfig,
    labels: &BTreeMap<String, MigrationLabel>,
    similarity_table: &BTreeMap<String, f64>,
    scorers: &TextScorers<'_>,
) -> Vec<FeatureVector> {
    let pre_ban_migrated = crate::corpus::pre_ban_migrated_set(corpus, config);

    // Phase 1: every user's DIV (DVI needs neighbors' values, neighbors may
    // be outside the retained label set).
    let div_of: BTreeMap<String, f64> = corpus
        .users
        .iter()
        .filter_map(|(user, act)| diversity(&act.per_community_counts).map(|d| (user.clone(), d)))
        .collect();

    let mut out = Vec::new();
    for (user, &label) in labels {
        if label == MigrationLabel::Discarded {
            continue;
        }
        let Some(activity) = corpus.users.get(user) else {
            continue;
        };
        let (tox, emo, ang, anx) = reflection_features(user, corpus, config, scorers);
        let mut eng_diag = EngagementDiag::default();
        let eng = engagement(activity, similarity_table, &config.focal_community, &mut eng_diag);
        let conn = connection_features(user, corpus, config, &pre_ban_migrated, &div_of);

        let scoring_posts: Vec<String> = corpus
            .scorable_pre_ban_posts(user, config)
            .filter(|p| !scorers.training_post_ids.contains(&p.id))
            .map(|p| p.body.clone())
            .collect();
        let coherence = cross_entropy(&scoring_posts, scorers.language_model);

        out.push(FeatureVector {
            user: user.clone(),
            tox,
            emo,
            ang,
            anx,
            div: div_of.get(user).copied(),
            eng,
            dvi: conn.dvi,
            sen: conn.sen,
            apb: conn.apb,
            ppb: conn.ppb,
            coherence,
            n_posts: activity.pre_ban_all_posts,
            seniority: account_age_days(activity, config),
        });
    }
    out
}

/// The regression-ready model matrix.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ModelMatrix {
    pub users: Vec<String>,
    /// Ordered column names, intercept first.
    pub columns: Vec<String>,
    /// Row-major data including the leading intercept column.
    pub data: nalgebra::DMatrix<f64>,
    /// 1 if the user migrated (selection indicator).
    pub selection: Vec<bool>,
    /// 1 if coactive; only defined where selection is true.
    pub outcome: Vec<Option<bool>>,
    /// Per-feature standardization parameters (excluding the intercept).
    pub means: Vec<f64>,
    pub stddevs: Vec<f64>,
    pub standardized: bool,
    pub dropped_rows: usize,
}

impl ModelMatrix {
    pub fn column_index(&self, name: &str) -> Result<usize, FeatureError> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| FeatureError::UnknownFeature(name.to_string()))
    }

    pub fn n_rows(&self) -> usize {
        self.data.nrows()
    }
}

/// Assemble the model matrix from feature vectors and labels. Rows with any
/// missing feature are dropped and counted.
pub fn assemble_matrix(
    features: &[FeatureVector],
    labels: &BTreeMap<String, MigrationLabel>,
    standardize: bool,
) -> Result<ModelMatrix, FeatureError> {
    let mut users = Vec::new();
    let mut rows: Vec<[f64; 13]> = Vec::new();
    let mut selection = Vec::new();
    let mut outcome = Vec::new();
    let mut dropped = 0usize;

    for fv in features {
        let label = match labels.get(&fv.user) {
            Some(&l) if l != MigrationLabel::Discarded => l,
            _ => continue,
        };
        let values = fv.values();
        if values.iter().any(|v| v.is_none() || !v.unwrap().is_finite()) {
            dropped += 1;
            continue;
        }
        let mut row = [0.0; 13];
        for (i, v) in values.iter().enumerate() {
            row[i] = v.unwrap();
        }
        users.push(fv.user.clone());
        rows.push(row);
        let migrated =
            matches!(label, MigrationLabel::Coactive | MigrationLabel::FullyMigrated);
        selection.push(migrated);
        outcome.push(if migrated { Some(label == MigrationLabel::Coactive) } else { None });
    }

    if rows.is_empty() {
        return Err(FeatureError::EmptyMatrix);
    }

    let n = rows.len();
    let mut means = vec![0.0; 13];
    let mut stddevs = vec![1.0; 13];
    for j in 0..13 {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        means[j] = mean;
        let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n as f64;
        stddevs[j] = var.sqrt();
        if standardize && stddevs[j] == 0.0 {
            return Err(FeatureError::ConstantColumn(FEATURE_NAMES[j].to_string()));
        }
    }

    let mut data = nalgebra::DMatrix::zeros(n, 14);
    for (i, row) in rows.iter().enumerate() {
        data[(i, 0)] = 1.0;
        for j in 0..13 {
            data[(i, j + 1)] =
                if standardize { (row[j] - means[j]) / stddevs[j] } else { row[j] };
        }
    }

    let mut columns = vec!["(Intercept)".to_string()];
    columns.extend(FEATURE_NAMES.iter().map(|s| s.to_string()));

    Ok(ModelMatrix {
        users,
        columns,
        data,
        selection,
        outcome,
        means,
        stddevs,
        standardized: standardize,
        dropped_rows: dropped,
    })
}

/// Export the matrix as tab-separated values with a header row.
pub fn write_matrix<W: std::io::Write>(mut w: W, matrix: &ModelMatrix) -> std::io::Result<()> {
    write!(w, "user\tselection\toutcome")?;
    for name in &matrix.columns[1..] {
        write!(w, "\t{name}")?;
    }
    writeln!(w)?;
    for i in 0..matrix.n_rows() {
        write!(
            w,
            "{}\t{}\t{}",
            matrix.users[i],
            matrix.selection[i] as u8,
            matrix.outcome[i].map(|o| if o { "1" } else { "0" }).unwrap_or("")
        )?;
        for j in 1..matrix.columns.len() {
            write!(w, "\t{}", matrix.data[(i, j)])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn counts(values: &[(&str, u32)]) -> BTreeMap<String, u32> {
        values.iter().map(|&(k, v)| (k.to_string(), v)).collect()
    }

    /// O(n^2) pairwise-sum oracle.
    fn gini_oracle(xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mu = xs.iter().sum::<f64>() / n;
        let mut sum = 0.0;
        for &a in xs {
            for &b in xs {
                sum += (a - b).abs();
            }
        }
        sum / (2.0 * n * n * mu)
    }

    #[test]
    fn gini_known_values() {
        assert_eq!(gini(&[10.0]).unwrap(), 0.0);
        assert_relative_eq!(gini(&[3.0, 1.0]).unwrap(), 0.25, epsilon = 1e-12);
        assert_relative_eq!(gini(&[9.0, 1.0]).unwrap(), 0.4, epsilon = 1e-12);
        assert!(gini(&[]).is_none());
    }

    #[test]
    fn gini_matches_pairwise_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.gen_range(1..500);
            let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(1..1000) as f64).collect();
            let got = gini(&xs).unwrap();
            assert_relative_eq!(got, gini_oracle(&xs), epsilon = 1e-9);
            assert!(got >= -1e-12 && got <= 1.0 - 1.0 / n as f64 + 1e-12);
        }
    }

    #[test]
    fn gini_scale_invariant() {
        let xs = [3.0, 1.0, 7.0, 2.0];
        let scaled: Vec<f64> = xs.iter().map(|x| x * 13.0).collect();
        assert_relative_eq!(gini(&xs).unwrap(), gini(&scaled).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn diversity_over_nonzero_counts() {
        assert_eq!(diversity(&counts(&[("a", 10)])).unwrap(), 0.0);
        assert_relative_eq!(
            diversity(&counts(&[("a", 3), ("b", 1), ("c", 0)])).unwrap(),
            0.25,
            epsilon = 1e-12
        );
        assert!(diversity(&BTreeMap::new()).is_none());
    }

    fn activity_with(countmap: BTreeMap<String, u32>) -> UserActivity {
        UserActivity { user: "u".into(), per_community_counts: countmap, ..Default::default() }
    }

    #[test]
    fn engagement_examples() {
        let mut table = BTreeMap::new();
        table.insert("a".to_string(), 0.5);
        table.insert("b".to_string(), -0.1);
        let mut diag = EngagementDiag::default();

        // All posts in one community with sim 0.5.
        let act = activity_with(counts(&[("a", 7)]));
        assert_relative_eq!(engagement(&act, &table, "focal", &mut diag).unwrap(), 0.5);

        // All posts in the focal community itself.
        let act = activity_with(counts(&[("focal", 9)]));
        assert_eq!(engagement(&act, &table, "focal", &mut diag).unwrap(), 0.0);

        // {a:4 (sim .5), b:6 (sim -.1), focal:10} -> (2 - 0.6) / 20 = 0.07.
        let act = activity_with(counts(&[("a", 4), ("b", 6), ("focal", 10)]));
        assert_relative_eq!(
            engagement(&act, &table, "focal", &mut diag).unwrap(),
            0.07,
            epsilon = 1e-12
        );
    }

    #[test]
    fn engagement_linear_in_similarity() {
        let act = activity_with(counts(&[("a", 4), ("b", 6), ("focal", 10)]));
        let mut table = BTreeMap::new();
        table.insert("a".to_string(), 0.5);
        table.insert("b".to_string(), -0.1);
        let mut diag = EngagementDiag::default();
        let base = engagement(&act, &table, "focal", &mut diag).unwrap();
        for v in table.values_mut() {
            *v *= 3.0;
        }
        let scaled = engagement(&act, &table, "focal", &mut diag).unwrap();
        assert_relative_eq!(scaled, 3.0 * base, epsilon = 1e-12);
    }

    #[test]
    fn engagement_counts_uncovered_communities() {
        let act = activity_with(counts(&[("unknown", 5)]));
        let table = BTreeMap::new();
        let mut diag = EngagementDiag::default();
        assert_eq!(engagement(&act, &table, "focal", &mut diag).unwrap(), 0.0);
        assert_eq!(diag.uncovered_communities, 1);
    }

    #[test]
    fn standardization_population_stddev() {
        let labels: BTreeMap<String, MigrationLabel> = [
            ("u1".to_string(), MigrationLabel::RedditOnly),
            ("u2".to_string(), MigrationLabel::Coactive),
        ]
        .into();
        let fv = |user: &str, x: f64| FeatureVector {
            user: user.into(),
            tox: Some(x),
            emo: Some(x + 1.0),
            ang: Some(-x),
            anx: Some(2.0 * x),
            div: Some(x / 10.0),
            eng: Some(x),
            dvi: Some(x),
            sen: Some(x),
            apb: Some(x / 4.0),
            ppb: Some(x / 4.0),
            coherence: Some(x + 3.0),
            n_posts: x as u32,
            seniority: Some(x * 30.0),
        };
        let matrix = assemble_matrix(&[fv("u1", 1.0), fv("u2", 3.0)], &labels, true).unwrap();
        // Column with values {1, 3} standardized -> {-1, 1}.
        let tox_col = matrix.column_index("tox").unwrap();
        assert_relative_eq!(matrix.data[(0, tox_col)], -1.0, epsilon = 1e-12);
        assert_relative_eq!(matrix.data[(1, tox_col)], 1.0, epsilon = 1e-12);
        assert!(matrix.selection[1]);
        assert_eq!(matrix.outcome[1], Some(true));
        assert_eq!(matrix.outcome[0], None);
    }

    #[test]
    fn missing_feature_drops_row() {
        let labels: BTreeMap<String, MigrationLabel> = [
            ("u1".to_string(), MigrationLabel::RedditOnly),
            ("u2".to_string(), MigrationLabel::RedditOnly),
        ]
        .into();
        let mut complete = FeatureVector {
            user: "u1".into(),
            tox: Some(0.1),
            emo: Some(0.2),
            ang: Some(0.3),
            anx: Some(0.4),
            div: Some(0.5),
            eng: Some(0.6),
            dvi: Some(0.7),
            sen: Some(0.8),
            apb: Some(0.9),
            ppb: Some(0.15),
            coherence: Some(5.0),
            n_posts: 12,
            seniority: Some(100.0),
        };
        let mut incomplete = complete.clone();
        incomplete.user = "u2".into();
        incomplete.coherence = None;
        complete.user = "u1".into();
        let matrix = assemble_matrix(&[complete, incomplete], &labels, false).unwrap();
        assert_eq!(matrix.n_rows(), 1);
        assert_eq!(matrix.dropped_rows, 1);
    }

    #[test]
    fn constant_column_fatal_under_standardization() {
        let labels: BTreeMap<String, MigrationLabel> = [
            ("u1".to_string(), MigrationLabel::RedditOnly),
            ("u2".to_string(), MigrationLabel::RedditOnly),
        ]
        .into();
        let fv = |user: &str, x: f64| FeatureVector {
            user: user.into(),
            tox: Some(0.5), // constant
            emo: Some(x),
            ang: Some(x),
            anx: Some(x),
            div: Some(x),
            eng: Some(x),
            dvi: Some(x),
            sen: Some(x),
            apb: Some(x),
            ppb: Some(x),
            coherence: Some(x),
            n_posts: x as u32,
            seniority: Some(x),
        };
        match assemble_matrix(&[fv("u1", 1.0), fv("u2", 2.0)], &labels, true) {
            Err(FeatureError::ConstantColumn(name)) => assert_eq!(name, "tox"),
            other => panic!("expected constant-column error, got {other:?}"),
        }
    }

    #[test]
    fn empty_retained_set_is_fatal() {
        let labels = BTreeMap::new();
        assert!(matches!(
            assemble_matrix(&[], &labels, true),
            Err(FeatureError::EmptyMatrix)
        ));
    }
}
