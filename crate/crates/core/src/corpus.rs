//! Corpus ingestion, activity aggregation, and migration labeling.
//!
//! Posts arrive as line-delimited JSON records from both the mainstream and
//! the fringe platform. Ingestion aggregates per-user activity around a
//! configured ban time, indexes threads and reply dyads, and labels each
//! sufficiently active user by their migration decision.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Six months, in seconds (the default pre-ban observation window).
pub const SIX_MONTHS_SECS: i64 = 182 * 24 * 3600;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("no valid post records in input")]
    EmptyCorpus,
    #[error("corpus contains no fringe-platform posts; migration labels are undefined")]
    NoFringePosts,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Platform {
    Mainstream,
    Fringe,
}

/// One authored message on either platform.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Post {
    pub id: String,
    #[serde(default)]
    pub author: Option<String>,
    pub community: String,
    pub thread_id: String,
    #[serde(default)]
    pub parent_id: Option<String>,
    pub created_utc: i64,
    #[serde(default)]
    pub body: String,
    pub platform: Platform,
    /// Optional externally supplied toxicity score (precomputed scorer mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toxicity: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusConfig {
    /// Ban time, UTC seconds since epoch.
    pub ban_time: i64,
    /// The banned community on the mainstream platform.
    pub focal_community: String,
    pub min_pre_ban_posts: u32,
    pub min_post_ban_mainstream_posts: u32,
    pub min_fringe_posts: u32,
    /// Length of the pre-ban observation window, seconds.
    pub pre_ban_window: i64,
}

impl CorpusConfig {
    pub fn new(ban_time: i64, focal_community: impl Into<String>) -> Self {
        CorpusConfig {
            ban_time,
            focal_community: focal_community.into(),
            min_pre_ban_posts: 10,
            min_post_ban_mainstream_posts: 10,
            min_fringe_posts: 5,
            pre_ban_window: SIX_MONTHS_SECS,
        }
    }

    /// Start of the pre-ban window.
    pub fn window_start(&self) -> i64 {
        self.ban_time - self.pre_ban_window
    }

    /// True for posts inside the pre-ban window (ties at ban_time are post-ban).
    pub fn is_pre_ban(&self, created_utc: i64) -> bool {
        created_utc >= self.window_start() && created_utc < self.ban_time
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MigrationLabel {
    RedditOnly,
    Coactive,
    FullyMigrated,
    Discarded,
}

impl fmt::Display for MigrationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MigrationLabel::RedditOnly => "reddit_only",
            MigrationLabel::Coactive => "coactive",
            MigrationLabel::FullyMigrated => "fully_migrated",
            MigrationLabel::Discarded => "discarded",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for MigrationLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reddit_only" => Ok(MigrationLabel::RedditOnly),
            "coactive" => Ok(MigrationLabel::Coactive),
            "fully_migrated" => Ok(MigrationLabel::FullyMigrated),
            "discarded" => Ok(MigrationLabel::Discarded),
            other => Err(format!("unknown migration label: {other}")),
        }
    }
}

/// Aggregated per-user activity around the ban.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct UserActivity {
    pub user: String,
    /// Pre-ban posts in the focal community.
    pub pre_ban_focal_posts: u32,
    /// All pre-ban posts on the mainstream platform.
    pub pre_ban_all_posts: u32,
    /// Mainstream posts at or after the ban time.
    pub post_ban_mainstream_posts: u32,
    /// All posts on the fringe platform (any time).
    pub fringe_posts: u32,
    /// Timestamp of the user's first post in the focal community, if any.
    pub first_focal_post_at: Option<i64>,
    /// Timestamp of the user's first fringe-platform post, if any.
    pub first_fringe_post_at: Option<i64>,
    /// Pre-ban mainstream post counts per community.
    pub per_community_counts: BTreeMap<String, u32>,
    /// Undirected reply dyad counts with peer users (pre-ban, mainstream).
    pub reply_dyads: BTreeMap<String, u32>,
    /// Pre-ban mainstream thread ids the user posted in.
    pub thread_ids: BTreeSet<String>,
}

/// One per-line ingestion diagnostic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestDiagnostic {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub posts: Vec<Post>,
    pub users: BTreeMap<String, UserActivity>,
    /// Pre-ban mainstream thread id -> set of authors posting in it.
    pub thread_members: BTreeMap<String, BTreeSet<String>>,
    pub diagnostics: Vec<IngestDiagnostic>,
    /// Posts skipped from text scoring (missing author or empty body).
    pub unscorable_posts: u32,
    pub has_fringe_posts: bool,
}

impl Corpus {
    pub fn activity(&self, user: &str) -> Option<&UserActivity> {
        self.users.get(user)
    }

    /// Pre-ban mainstream posts by `user` with scorable text.
    pub fn scorable_pre_ban_posts<'a>(
        &'a self,
        user: &'a str,
        config: &'a CorpusConfig,
    ) -> impl Iterator<Item = &'a Post> {
        self.posts.iter().filter(move |p| {
            p.platform == Platform::Mainstream
                && config.is_pre_ban(p.created_utc)
                && p.author.as_deref() == Some(user)
                && !p.body.trim().is_empty()
        })
    }
}

/// Parse and aggregate a stream of line-delimited JSON post records.
///
/// Malformed lines and duplicate ids produce per-line diagnostics and are
/// skipped; an input with zero valid records is fatal.
pub fn ingest<R: BufRead>(reader: R, config: &CorpusConfig) -> Result<Corpus, CorpusError> {
    let mut posts: Vec<Post> = Vec::new();
    let mut seen_ids: BTreeSet<String> = BTreeSet::new();
    let mut diagnostics = Vec::new();

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Post>(&line) {
            Ok(post) => {
                if post.created_utc <= 0 {
                    diagnostics.push(IngestDiagnostic {
                        line: lineno,
                        message: format!("post {}: non-positive created_utc", post.id),
                    });
                    continue;
                }
                if !seen_ids.insert(post.id.clone()) {
                    diagnostics.push(IngestDiagnostic {
                        line: lineno,
                        message: format!("duplicate post id {}", post.id),
                    });
                    continue;
                }
                posts.push(post);
            }
            Err(err) => {
                diagnostics.push(IngestDiagnostic {
                    line: lineno,
                    message: format!("malformed record: {err}"),
                });
            }
        }
    }

    if posts.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }

    Ok(aggregate(posts, diagnostics, config))
}

/// Build a corpus from already-parsed posts. Duplicate ids are dropped with a
/// diagnostic. The aggregation is order-independent: any permutation of the
/// input yields identical aggregates.
pub fn from_posts(posts: Vec<Post>, config: &CorpusConfig) -> Result<Corpus, CorpusError> {
    let mut seen_ids = BTreeSet::new();
    let mut unique = Vec::with_capacity(posts.len());
    let mut diagnostics = Vec::new();
    for post in posts {
        if seen_ids.insert(post.id.clone()) {
            unique.push(post);
        } else {
            diagnostics.push(IngestDiagnostic {
                line: 0,
                message: format!("duplicate post id {}", post.id),
            });
        }
    }
    if unique.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok(aggregate(unique, diagnostics, config))
}

fn aggregate(mut posts: Vec<Post>, diagnostics: Vec<IngestDiagnostic>, config: &CorpusConfig) -> Corpus {
    // Canonical order keeps downstream iteration deterministic regardless of
    // input ordering.
    posts.sort_by(|a, b| (a.created_utc, &a.id).cmp(&(b.created_utc, &b.id)));

    let mut users: BTreeMap<String, UserActivity> = BTreeMap::new();
    let mut thread_members: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut author_of: BTreeMap<&str, &str> = BTreeMap::new();
    let mut unscorable = 0u32;
    let mut has_fringe = false;

    for post in &posts {
        if post.author.is_none() || post.body.trim().is_empty() {
            unscorable += 1;
        }
        if post.platform == Platform::Fringe {
            has_fringe = true;
        }
        let Some(author) = post.author.as_deref() else {
            continue;
        };
        author_of.insert(post.id.as_str(), author);

        let entry = users.entry(author.to_string()).or_insert_with(|| UserActivity {
            user: author.to_string(),
            ..UserActivity::default()
        });

        match post.platform {
            Platform::Fringe => {
                entry.fringe_posts += 1;
                entry.first_fringe_post_at = Some(match entry.first_fringe_post_at {
                    Some(t) => t.min(post.created_utc),
                    None => post.created_utc,
                });
            }
            Platform::Mainstream => {
                if post.community == config.focal_community {
                    entry.first_focal_post_at = Some(match entry.first_focal_post_at {
                        Some(t) => t.min(post.created_utc),
                        None => post.created_utc,
                    });
                }
                if post.created_utc >= config.ban_time {
                    entry.post_ban_mainstream_posts += 1;
                } else if config.is_pre_ban(post.created_utc) {
                    entry.pre_ban_all_posts += 1;
                    if post.community == config.focal_community {
                        entry.pre_ban_focal_posts += 1;
                    }
                    *entry.per_community_counts.entry(post.community.clone()).or_insert(0) += 1;
                    entry.thread_ids.insert(post.thread_id.clone());
                    thread_members
                        .entry(post.thread_id.clone())
                        .or_default()
                        .insert(author.to_string());
                }
            }
        }
    }

    // Reply dyads: a pre-ban mainstream parent-child pair between two distinct
    // authors contributes one undirected reply to both sides.
    for post in &posts {
        if post.platform != Platform::Mainstream || !config.is_pre_ban(post.created_utc) {
            continue;
        }
        let (Some(author), Some(parent_id)) = (post.author.as_deref(), post.parent_id.as_deref())
        else {
            continue;
        };
        let Some(&parent_author) = author_of.get(parent_id) else {
            continue;
        };
        if parent_author == author {
            continue;
        }
        let parent_author = parent_author.to_string();
        if let Some(a) = users.get_mut(author) {
            *a.reply_dyads.entry(parent_author.clone()).or_insert(0) += 1;
        }
        if let Some(p) = users.get_mut(&parent_author) {
            *p.reply_dyads.entry(author.to_string()).or_insert(0) += 1;
        }
    }

    Corpus {
        posts,
        users,
        thread_members,
        diagnostics,
        unscorable_posts: unscorable,
        has_fringe_posts: has_fringe,
    }
}

/// Assign each user a migration label by the activity thresholds.
pub fn label_users(
    corpus: &Corpus,
    config: &CorpusConfig,
) -> Result<BTreeMap<String, MigrationLabel>, CorpusError> {
    if !corpus.has_fringe_posts {
        return Err(CorpusError::NoFringePosts);
    }
    let mut labels = BTreeMap::new();
    for (user, act) in &corpus.users {
        let label = classify(act, config);
        labels.insert(user.clone(), label);
    }
    Ok(labels)
}

fn classify(act: &UserActivity, config: &CorpusConfig) -> MigrationLabel {
    if act.pre_ban_focal_posts < config.min_pre_ban_posts {
        return MigrationLabel::Discarded;
    }
    let migrated = act.fringe_posts >= config.min_fringe_posts;
    let active_on_mainstream = act.post_ban_mainstream_posts >= config.min_post_ban_mainstream_posts;
    match (migrated, active_on_mainstream) {
        (true, true) => MigrationLabel::Coactive,
        (true, false) => MigrationLabel::FullyMigrated,
        (false, true) => MigrationLabel::RedditOnly,
        (false, false) => MigrationLabel::Discarded,
    }
}

/// Users with at least one fringe-platform post strictly before the ban.
pub fn pre_ban_migrated_set(corpus: &Corpus, config: &CorpusConfig) -> BTreeSet<String> {
    corpus
        .users
        .values()
        .filter(|a| matches!(a.first_fringe_post_at, Some(t) if t < config.ban_time))
        .map(|a| a.user.clone())
        .collect()
}

/// Serialize the label table: user, label, and the five aggregate counts.
pub fn write_label_table<W: std::io::Write>(
    mut w: W,
    corpus: &Corpus,
    labels: &BTreeMap<String, MigrationLabel>,
) -> std::io::Result<()> {
    writeln!(
        w,
        "user\tlabel\tpre_ban_focal_posts\tpre_ban_all_posts\tpost_ban_mainstream_posts\tfringe_posts\tthread_count"
    )?;
    for (user, label) in labels {
        let act = &corpus.users[user];
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            user,
            label,
            act.pre_ban_focal_posts,
            act.pre_ban_all_posts,
            act.post_ban_mainstream_posts,
            act.fringe_posts,
            act.thread_ids.len()
        )?;
    }
    Ok(())
}
