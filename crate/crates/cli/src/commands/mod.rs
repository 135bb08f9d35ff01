//! One module per subcommand, plus shared artifact loaders.

pub mod classify;
pub mod features;
pub mod fit;
pub mod ingest;
pub mod report;
pub mod similarity;

use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::Path;

use anyhow::{Context, Result};

use migration_core::corpus::{self, Corpus, CorpusConfig, MigrationLabel};
use migration_core::features::ModelMatrix;

/// Re-ingest the normalized corpus artifact written by the ingest stage.
pub fn load_corpus(out_dir: &Path, config: &CorpusConfig) -> Result<Corpus> {
    let path = out_dir.join("corpus.jsonl");
    let reader = BufReader::new(
        std::fs::File::open(&path).with_context(|| format!("cannot open {}", path.display()))?,
    );
    let corpus = corpus::ingest(reader, config).context("stage 'ingest' artifact unreadable")?;
    Ok(corpus)
}

pub fn load_matrix(out_dir: &Path) -> Result<ModelMatrix> {
    let path = out_dir.join("matrix.json");
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let matrix: ModelMatrix = serde_json::from_str(&text)
        .with_context(|| format!("corrupt matrix artifact {}", path.display()))?;
    Ok(matrix)
}

/// Per-row migration labels implied by the matrix's selection/outcome flags.
/// Discarded users never enter the matrix, so three labels cover every row.
pub fn matrix_labels(matrix: &ModelMatrix) -> Vec<MigrationLabel> {
    matrix
        .selection
        .iter()
        .zip(&matrix.outcome)
        .map(|(&selected, outcome)| {
            if !selected {
                MigrationLabel::RedditOnly
            } else if outcome == &Some(true) {
                MigrationLabel::Coactive
            } else {
                MigrationLabel::FullyMigrated
            }
        })
        .collect()
}

/// Feature-only view of the matrix: every column except the intercept.
pub fn feature_view(matrix: &ModelMatrix) -> (nalgebra::DMatrix<f64>, Vec<String>) {
    let data = matrix.data.columns(1, matrix.data.ncols() - 1).into_owned();
    let names = matrix.columns[1..].to_vec();
    (data, names)
}

pub fn label_counts(labels: &BTreeMap<String, MigrationLabel>) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for label in labels.values() {
        *counts.entry(label.to_string()).or_insert(0) += 1;
    }
    counts
}
