//! `migrate ingest`: parse the raw post files, label every user, and persist
//! the normalized corpus plus the label table.

use std::io::{BufWriter, Write};

use anyhow::{Context, Result};

use migration_core::corpus::{self, Platform};

use crate::artifacts::StageMeta;
use crate::config::PipelineConfig;

pub fn run(config: &PipelineConfig, config_hash: &str) -> Result<()> {
    let corpus_config = config.corpus.to_corpus_config();
    let out_dir = &config.output_dir;

    // Concatenate the input files into one record stream; ingest reports
    // malformed lines as diagnostics rather than failing.
    let mut raw = String::new();
    for path in &config.corpus.inputs {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read input {}", path.display()))?;
        raw.push_str(&text);
        if !raw.ends_with('\n') {
            raw.push('\n');
        }
    }
    let corpus = corpus::ingest(raw.as_bytes(), &corpus_config)?;
    let labels = corpus::label_users(&corpus, &corpus_config)?;

    // Normalized corpus: the parsed records, one JSON object per line.
    {
        let file = std::fs::File::create(out_dir.join("corpus.jsonl"))?;
        let mut w = BufWriter::new(file);
        for post in &corpus.posts {
            serde_json::to_writer(&mut w, post)?;
            writeln!(w)?;
        }
    }

    {
        let file = std::fs::File::create(out_dir.join("labels.tsv"))?;
        corpus::write_label_table(BufWriter::new(file), &corpus, &labels)?;
    }

    {
        let file = std::fs::File::create(out_dir.join("ingest.log"))?;
        let mut w = BufWriter::new(file);
        for diag in &corpus.diagnostics {
            writeln!(w, "line {}: {}", diag.line, diag.message)?;
        }
    }

    let label_counts = super::label_counts(&labels);
    let mainstream =
        corpus.posts.iter().filter(|p| p.platform == Platform::Mainstream).count();
    let fringe = corpus.posts.len() - mainstream;
    let summary = serde_json::json!({
        "users_per_label": label_counts,
        "posts": {
            "mainstream": mainstream,
            "fringe": fringe,
        },
        "unscorable_posts": corpus.unscorable_posts,
        "diagnostics": corpus.diagnostics.len(),
    });
    let mut summary_text = serde_json::to_string_pretty(&summary)?;
    summary_text.push('\n');
    std::fs::write(out_dir.join("ingest_summary.json"), summary_text)?;

    let mut meta = StageMeta::new("ingest", config_hash, config.seed);
    meta.counts.insert("posts".into(), corpus.posts.len() as u64);
    meta.counts.insert("users".into(), corpus.users.len() as u64);
    for (label, count) in &label_counts {
        meta.counts.insert(format!("users_{label}"), *count);
    }
    for name in ["corpus.jsonl", "labels.tsv", "ingest.log", "ingest_summary.json"] {
        meta.record_artifact(out_dir, name)?;
    }
    meta.write(out_dir)?;
    Ok(())
}
