//! Community co-user graph construction, biased random-walk node embeddings,
//! and cosine similarity to the focal community.

pub mod graph;
pub mod node2vec;
pub mod spearman;
pub mod store;

pub use graph::{build_graph, CommunityGraph};
pub use node2vec::{similarity, train_embeddings, EmbeddingTable, WalkConfig};
pub use spearman::spearman_validation;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphSimError {
    #[error("community {0:?} not present in the corpus")]
    MissingCommunity(String),
    #[error("focal node {0:?} is isolated; embeddings are undefined")]
    IsolatedFocal(String),
    #[error("unknown node {0:?} in embedding table")]
    UnknownNode(String),
    #[error("rankings cover different community sets")]
    MismatchedRankings,
    #[error("bad embedding file: {0}")]
    BadEmbeddingFile(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
