//! `migrate features`: score text, train the community language model, and
//! assemble the regression-ready model matrix.

use std::collections::BTreeSet;
use std::io::{BufReader, BufWriter, Write};

use anyhow::{Context, Result};

use migration_core::corpus::{self, Platform, Post};
use migration_core::features::{assemble_matrix, compute_features, write_matrix, TextScorers};
use migration_core::graphsim::store::read_similarity_table;
use migration_core::textscore::category::Category;
use migration_core::textscore::{
    train_ngram, CategoryLexicon, ToxicityScorer, ToxicityScorerConfig, ValenceLexicon,
};

use crate::artifacts::{require_upstream, StageMeta};
use crate::config::PipelineConfig;

/// Environment variable carrying the toxicity-service bearer token.
pub const TOXICITY_KEY_VAR: &str = "MIGRATE_TOXICITY_KEY";

pub fn run(config: &PipelineConfig, config_hash: &str) -> Result<()> {
    let out_dir = &config.output_dir;
    let ingest_meta = require_upstream(out_dir, config_hash, "ingest")?;
    let similarity_meta = require_upstream(out_dir, config_hash, "similarity")?;

    let corpus_config = config.corpus.to_corpus_config();
    let corpus = super::load_corpus(out_dir, &corpus_config)?;
    let labels = corpus::label_users(&corpus, &corpus_config)?;

    let similarity_path = out_dir.join("similarity.tsv");
    let similarity_table = read_similarity_table(BufReader::new(
        std::fs::File::open(&similarity_path)
            .with_context(|| format!("cannot open {}", similarity_path.display()))?,
    ))?;

    let ts = &config.textscore;
    let valence = ValenceLexicon::load(
        &ts.valence_lexicon,
        ts.booster_lexicon.as_deref(),
        ts.negator_lexicon.as_deref(),
    )?;
    let anger = CategoryLexicon::load(Category::Anger, &ts.anger_lexicon)?;
    let anxiety = CategoryLexicon::load(Category::Anxiety, &ts.anxiety_lexicon)?;

    let mut tox_config = ToxicityScorerConfig {
        mode: ts.toxicity_mode,
        endpoint: ts.toxicity_endpoint.clone(),
        api_key: std::env::var(TOXICITY_KEY_VAR).ok(),
        request_rate_limit: ts.request_rate_limit,
        squash_scale: ts.squash_scale,
        ..ToxicityScorerConfig::default()
    };
    if let Some(path) = &ts.offensive_lexicon {
        tox_config.load_lexicon(path)?;
    }
    let toxicity = ToxicityScorer::new(tox_config)?;

    // Community language model: train on the chronologically first half of
    // the focal community's scorable pre-ban posts; the training posts are
    // excluded from every user's coherence scoring set.
    let mut focal_posts: Vec<&Post> = corpus
        .posts
        .iter()
        .filter(|p| {
            p.platform == Platform::Mainstream
                && p.community == config.corpus.focal_community
                && corpus_config.is_pre_ban(p.created_utc)
                && !p.body.trim().is_empty()
        })
        .collect();
    focal_posts.sort_by(|a, b| a.created_utc.cmp(&b.created_utc).then(a.id.cmp(&b.id)));
    let n_train = focal_posts.len().div_ceil(2);
    let training_bodies: Vec<&str> =
        focal_posts[..n_train].iter().map(|p| p.body.as_str()).collect();
    let training_post_ids: BTreeSet<String> =
        focal_posts[..n_train].iter().map(|p| p.id.clone()).collect();
    let language_model = train_ngram(&training_bodies, ts.ngram_order, ts.smoothing_constant)?;

    let scorers = TextScorers {
        valence: &valence,
        anger: &anger,
        anxiety: &anxiety,
        toxicity: &toxicity,
        language_model: &language_model,
        training_post_ids: &training_post_ids,
    };
    let features =
        compute_features(&corpus, &corpus_config, &labels, &similarity_table, &scorers);
    let matrix = assemble_matrix(&features, &labels, config.econometrics.standardize)?;

    {
        let file = std::fs::File::create(out_dir.join("matrix.tsv"))?;
        write_matrix(BufWriter::new(file), &matrix)?;
    }
    {
        let file = std::fs::File::create(out_dir.join("matrix.json"))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, &matrix)?;
        writeln!(w)?;
    }

    let mut meta = StageMeta::new("features", config_hash, config.seed);
    meta.record_upstream(&ingest_meta);
    meta.record_upstream(&similarity_meta);
    meta.counts.insert("rows".into(), matrix.n_rows() as u64);
    meta.counts.insert("dropped_rows".into(), matrix.dropped_rows as u64);
    meta.counts.insert("lm_training_posts".into(), n_train as u64);
    for name in ["matrix.tsv", "matrix.json"] {
        meta.record_artifact(out_dir, name)?;
    }
    meta.write(out_dir)?;
    Ok(())
}
