//! `migrate similarity`: build the community co-user graph, train node
//! embeddings, and persist the community-to-focal similarity table.

use std::collections::BTreeMap;
use std::io::BufWriter;

use anyhow::{Context, Result};

use migration_core::graphsim::{self, store};

use crate::artifacts::{require_upstream, StageMeta};
use crate::config::PipelineConfig;

pub fn run(config: &PipelineConfig, config_hash: &str) -> Result<()> {
    let out_dir = &config.output_dir;
    let upstream = require_upstream(out_dir, config_hash, "ingest")?;

    let corpus_config = config.corpus.to_corpus_config();
    let corpus = super::load_corpus(out_dir, &corpus_config)?;

    let focal = &config.corpus.focal_community;
    let graph = graphsim::build_graph(
        &corpus,
        focal,
        &config.graphsim.polar_community,
        config.graphsim.relevance_min_users,
        config.graphsim.relevance_min_posts,
    )?;
    let walk_config = config.graphsim.to_walk_config(config.seed);
    let table = graphsim::train_embeddings(&graph, &walk_config)?;

    store::save_embeddings(&out_dir.join("embeddings.bin"), &table)?;

    let mut similarities: BTreeMap<String, f64> = BTreeMap::new();
    for community in table.vectors.keys() {
        similarities
            .insert(community.clone(), graphsim::similarity(&table, community, focal)?);
    }
    {
        let file = std::fs::File::create(out_dir.join("similarity.tsv"))?;
        store::write_similarity_table(BufWriter::new(file), &similarities)?;
    }

    let mut artifacts = vec!["embeddings.bin", "similarity.tsv"];
    if let Some(path) = &config.graphsim.reference_ranking {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read reference ranking {}", path.display()))?;
        let reference: Vec<String> =
            text.lines().map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect();
        // Learned ranking: most to least similar to the focal community,
        // restricted to the communities the reference file names.
        let mut learned: Vec<String> = similarities
            .keys()
            .filter(|c| reference.contains(c))
            .cloned()
            .collect();
        learned.sort_by(|a, b| similarities[b].total_cmp(&similarities[a]).then(a.cmp(b)));
        let result = graphsim::spearman_validation(&learned, &reference)?;
        let mut json = serde_json::to_string_pretty(&serde_json::json!({
            "rho": result.rho,
            "p_value": result.p_value,
            "communities": learned.len(),
        }))?;
        json.push('\n');
        std::fs::write(out_dir.join("spearman.json"), json)?;
        artifacts.push("spearman.json");
    }

    let mut meta = StageMeta::new("similarity", config_hash, config.seed);
    meta.record_upstream(&upstream);
    meta.counts.insert("graph_nodes".into(), graph.node_count() as u64);
    meta.counts.insert("communities".into(), similarities.len() as u64);
    for name in artifacts {
        meta.record_artifact(out_dir, name)?;
    }
    meta.write(out_dir)?;
    Ok(())
}
