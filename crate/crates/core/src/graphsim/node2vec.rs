//! Biased second-order random walks and skip-gram training with negative
//! sampling over community graphs.
//!
//! Training is deterministic for a fixed seed: walks are generated with
//! per-walk seeded generators and gradients are applied in a fixed order.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::CommunityGraph;
use super::GraphSimError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WalkConfig {
    pub dimension: usize,
    pub walks_per_node: usize,
    pub walk_length: usize,
    /// Return parameter p: transition weight back to the previous node scales by 1/p.
    pub return_param: f64,
    /// In-out parameter q: transition weight to nodes not adjacent to the
    /// previous node scales by 1/q.
    pub inout_param: f64,
    pub window: usize,
    pub negative_samples: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            dimension: 128,
            walks_per_node: 10,
            walk_length: 80,
            return_param: 1.0,
            inout_param: 1.0,
            window: 10,
            negative_samples: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub dimension: usize,
    pub vectors: BTreeMap<String, Vec<f32>>,
}

impl EmbeddingTable {
    pub fn vector(&self, node: &str) -> Result<&[f32], GraphSimError> {
        self.vectors
            .get(node)
            .map(|v| v.as_slice())
            .ok_or_else(|| GraphSimError::UnknownNode(node.to_string()))
    }
}

/// Cosine similarity between two embedded nodes, in [-1, 1].
pub fn similarity(table: &EmbeddingTable, a: &str, b: &str) -> Result<f64, GraphSimError> {
    let va = table.vector(a)?;
    let vb = table.vector(b)?;
    Ok(cosine(va, vb))
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        dot += x as f64 * y as f64;
        na += x as f64 * x as f64;
        nb += y as f64 * y as f64;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// One second-order biased walk starting at `start`.
pub fn biased_walk(
    graph: &CommunityGraph,
    start: usize,
    config: &WalkConfig,
    rng: &mut impl Rng,
) -> Vec<usize> {
    let mut walk = Vec::with_capacity(config.walk_length);
    walk.push(start);
    if graph.degree(start) == 0 {
        return walk;
    }
    while walk.len() < config.walk_length {
        let current = *walk.last().unwrap();
        let neighbors = graph.neighbors(current);
        if neighbors.is_empty() {
            break;
        }
        let next = if walk.len() == 1 {
            // First step: first-order, weighted by edge weight.
            weighted_choice(neighbors.iter().map(|&(n, w)| (n, w)), rng)
        } else {
            let prev = walk[walk.len() - 2];
            weighted_choice(
                neighbors.iter().map(|&(n, w)| {
                    let bias = if n == prev {
                        1.0 / config.return_param
                    } else if graph.edge_weight(n, prev).is_some() {
                        1.0
                    } else {
                        1.0 / config.inout_param
                    };
                    (n, w * bias)
                }),
                rng,
            )
        };
        walk.push(next);
    }
    walk
}

fn weighted_choice(options: impl Iterator<Item = (usize, f64)>, rng: &mut impl Rng) -> usize {
    let collected: Vec<(usize, f64)> = options.collect();
    let total: f64 = collected.iter().map(|&(_, w)| w).sum();
    let mut target = rng.gen::<f64>() * total;
    for &(n, w) in &collected {
        target -= w;
        if target <= 0.0 {
            return n;
        }
    }
    collected.last().unwrap().0
}

/// Generate the full walk set. Each walk gets its own generator seeded from
/// the root seed, walk index, and start node, so generation order never
/// affects the result.
pub fn generate_walks(graph: &CommunityGraph, config: &WalkConfig) -> Vec<Vec<usize>> {
    let mut walks = Vec::with_capacity(config.walks_per_node * graph.node_count());
    for round in 0..config.walks_per_node {
        for start in 0..graph.node_count() {
            let seed = config
                .seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add((round as u64) << 32)
                .wrapping_add(start as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            walks.push(biased_walk(graph, start, config, &mut rng));
        }
    }
    walks
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Train skip-gram embeddings with negative sampling over the walk corpus.
pub fn train_embeddings(
    graph: &CommunityGraph,
    config: &WalkConfig,
) -> Result<EmbeddingTable, GraphSimError> {
    let n = graph.node_count();
    for node in 0..n {
        // An isolated focal node cannot be embedded meaningfully; the caller
        // passes the graph anchored on the focal community, so any isolated
        // node is a build error worth surfacing.
        if graph.degree(node) == 0 {
            return Err(GraphSimError::IsolatedFocal(graph.nodes[node].clone()));
        }
    }

    let walks = generate_walks(graph, config);

    // Negative-sampling distribution: walk-frequency^0.75.
    let mut freq = vec![0.0f64; n];
    for walk in &walks {
        for &node in walk {
            freq[node] += 1.0;
        }
    }
    let weights: Vec<f64> = freq.iter().map(|f| f.powf(0.75)).collect();
    let cumulative: Vec<f64> = weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let total_weight = *cumulative.last().unwrap();

    let d = config.dimension;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xDEAD_BEEF_CAFE_F00D);
    let init = Uniform::new(-0.5 / d as f32, 0.5 / d as f32);
    let mut input: Vec<Vec<f32>> = (0..n).map(|_| (0..d).map(|_| init.sample(&mut rng)).collect()).collect();
    let mut output: Vec<Vec<f32>> = vec![vec![0.0; d]; n];

    let sample_negative = |rng: &mut ChaCha8Rng| -> usize {
        let target = rng.gen::<f64>() * total_weight;
        cumulative.partition_point(|&c| c < target).min(n - 1)
    };

    for epoch in 0..config.epochs {
        let lr = config.learning_rate * (1.0 - epoch as f64 / config.epochs.max(1) as f64).max(0.1);
        for walk in &walks {
            for (pos, &center) in walk.iter().enumerate() {
                let lo = pos.saturating_sub(config.window);
                let hi = (pos + config.window + 1).min(walk.len());
                for ctx_pos in lo..hi {
                    if ctx_pos == pos {
                        continue;
                    }
                    let context = walk[ctx_pos];
                    // Positive update plus negative samples.
                    let mut grad_center = vec![0.0f32; d];
                    for sample in 0..=config.negative_samples {
                        let (target_node, label) = if sample == 0 {
                            (context, 1.0)
                        } else {
                            (sample_negative(&mut rng), 0.0)
                        };
                        if sample > 0 && target_node == context {
                            continue;
                        }
                        let dot: f64 = input[center]
                            .iter()
                            .zip(&output[target_node])
                            .map(|(&a, &b)| a as f64 * b as f64)
                            .sum();
                        let g = (lr * (label - sigmoid(dot))) as f32;
                        for i in 0..d {
                            grad_center[i] += g * output[target_node][i];
                            output[target_node][i] += g * input[center][i];
                        }
                    }
                    for i in 0..d {
                        input[center][i] += grad_center[i];
                    }
                }
            }
        }
    }

    let vectors = graph
        .nodes
        .iter()
        .enumerate()
        .map(|(i, name)| (name.clone(), input[i].clone()))
        .collect();
    Ok(EmbeddingTable { dimension: d, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two 5-cliques bridged by a single edge.
    pub(crate) fn bridged_cliques() -> CommunityGraph {
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for c in 0..2 {
            for i in 0..5 {
                nodes.push(format!("c{c}n{i}"));
            }
            for i in 0..5 {
                for j in (i + 1)..5 {
                    edges.push((format!("c{c}n{i}"), format!("c{c}n{j}"), 5));
                }
            }
        }
        edges.push(("c0n0".to_string(), "c1n0".to_string(), 5));
        CommunityGraph::from_edges(nodes, edges)
    }

    fn small_config(seed: u64) -> WalkConfig {
        WalkConfig {
            dimension: 16,
            walks_per_node: 10,
            walk_length: 40,
            epochs: 3,
            seed,
            ..WalkConfig::default()
        }
    }

    #[test]
    fn cosine_identities() {
        let mut table = EmbeddingTable { dimension: 3, vectors: BTreeMap::new() };
        table.vectors.insert("x".into(), vec![1.0, 2.0, 3.0]);
        table.vectors.insert("y".into(), vec![-1.0, -2.0, -3.0]);
        table.vectors.insert("z".into(), vec![0.0, 3.0, -2.0]);
        assert!((similarity(&table, "x", "x").unwrap() - 1.0).abs() < 1e-12);
        assert!((similarity(&table, "x", "y").unwrap() + 1.0).abs() < 1e-12);
        assert!(similarity(&table, "x", "z").unwrap().abs() < 1e-12);
        assert!(matches!(
            similarity(&table, "x", "missing"),
            Err(GraphSimError::UnknownNode(_))
        ));
    }

    #[test]
    fn cosine_scale_invariant() {
        let v = [1.0f32, -2.0, 0.5];
        let w = [0.3f32, 0.7, -1.1];
        let scaled: Vec<f32> = v.iter().map(|x| x * 3.5).collect();
        assert!((cosine(&v, &w) - cosine(&scaled, &w)).abs() < 1e-6);
    }

    #[test]
    fn same_seed_identical_embeddings() {
        let g = bridged_cliques();
        let cfg = small_config(11);
        let a = train_embeddings(&g, &cfg).unwrap();
        let b = train_embeddings(&g, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn intra_clique_similarity_exceeds_inter() {
        let g = bridged_cliques();
        let table = train_embeddings(&g, &small_config(3)).unwrap();
        let mut intra = Vec::new();
        let mut inter = Vec::new();
        for i in 0..5 {
            for j in (i + 1)..5 {
                intra.push(similarity(&table, &format!("c0n{i}"), &format!("c0n{j}")).unwrap());
                intra.push(similarity(&table, &format!("c1n{i}"), &format!("c1n{j}")).unwrap());
            }
        }
        for i in 0..5 {
            for j in 0..5 {
                inter.push(similarity(&table, &format!("c0n{i}"), &format!("c1n{j}")).unwrap());
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&intra) > mean(&inter));
    }

    #[test]
    fn isolated_node_is_fatal() {
        let g = CommunityGraph::from_edges(
            vec!["a".into(), "b".into(), "lonely".into()],
            vec![("a".to_string(), "b".to_string(), 5)],
        );
        assert!(matches!(
            train_embeddings(&g, &small_config(1)),
            Err(GraphSimError::IsolatedFocal(_))
        ));
    }

    #[test]
    fn walk_transitions_degree_proportional_at_p_q_one() {
        // Unweighted path-ish graph with unequal degrees.
        let nodes: Vec<String> = (0..6).map(|i| format!("n{i}")).collect();
        let mut edges = Vec::new();
        let pairs = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 2), (1, 4)];
        for &(a, b) in &pairs {
            edges.push((format!("n{a}"), format!("n{b}"), 1));
        }
        let g = CommunityGraph::from_edges(nodes, edges);
        let cfg = WalkConfig { walk_length: 100_000, ..WalkConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let walk = biased_walk(&g, 0, &cfg, &mut rng);
        let mut visits = vec![0usize; g.node_count()];
        for &n in walk.iter().skip(1) {
            visits[n] += 1;
        }
        let total_degree: usize = (0..g.node_count()).map(|n| g.degree(n)).sum();
        let steps = walk.len() - 1;
        let mut chi2 = 0.0;
        for n in 0..g.node_count() {
            let expected = steps as f64 * g.degree(n) as f64 / total_degree as f64;
            let diff = visits[n] as f64 - expected;
            chi2 += diff * diff / expected;
        }
        // df = 5; critical value at p = 0.01 is 15.09.
        assert!(chi2 < 15.09, "chi2 = {chi2}");
    }
}
