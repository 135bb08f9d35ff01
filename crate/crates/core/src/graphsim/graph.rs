//! Relevance-filtered co-user community graph.
//!
//! A community is relevant when enough users of the focal community or its
//! polar opposite are active there; two communities are connected when they
//! share enough active users. "Active" means at least `relevance_min_posts`
//! pre-ban posts in that community.

use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::Corpus;

use super::GraphSimError;

/// Minimum shared active users for an edge to exist.
pub const EDGE_MIN_SHARED_USERS: u32 = 5;

#[derive(Debug, Clone)]
pub struct CommunityGraph {
    /// Sorted node names.
    pub nodes: Vec<String>,
    index: BTreeMap<String, usize>,
    /// Unordered pair (i < j) -> shared active user count.
    pub edges: BTreeMap<(usize, usize), u32>,
    /// Adjacency list: node -> (neighbor, weight).
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl CommunityGraph {
    pub fn from_edges(
        nodes: Vec<String>,
        edge_list: impl IntoIterator<Item = (String, String, u32)>,
    ) -> Self {
        let mut nodes = nodes;
        nodes.sort();
        nodes.dedup();
        let index: BTreeMap<String, usize> =
            nodes.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let mut edges = BTreeMap::new();
        for (a, b, w) in edge_list {
            let (ia, ib) = (index[&a], index[&b]);
            if ia == ib {
                continue;
            }
            let key = (ia.min(ib), ia.max(ib));
            edges.insert(key, w);
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (&(i, j), &w) in &edges {
            adjacency[i].push((j, w as f64));
            adjacency[j].push((i, w as f64));
        }
        for neigh in &mut adjacency {
            neigh.sort_by_key(|&(n, _)| n);
        }
        CommunityGraph { nodes, index, edges, adjacency }
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn edge_weight(&self, a: usize, b: usize) -> Option<f64> {
        self.edges.get(&(a.min(b), a.max(b))).map(|&w| w as f64)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

/// Build the co-user graph for a focal community and its polar opposite.
pub fn build_graph(
    corpus: &Corpus,
    focal: &str,
    polar_opposite: &str,
    relevance_min_users: u32,
    relevance_min_posts: u32,
) -> Result<CommunityGraph, GraphSimError> {
    // community -> users with >= relevance_min_posts pre-ban posts there
    let mut active_users: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for act in corpus.users.values() {
        for (community, &count) in &act.per_community_counts {
            if count >= relevance_min_posts {
                active_users.entry(community.as_str()).or_default().insert(act.user.as_str());
            }
        }
    }
    for anchor in [focal, polar_opposite] {
        if !corpus.users.values().any(|a| a.per_community_counts.contains_key(anchor)) {
            return Err(GraphSimError::MissingCommunity(anchor.to_string()));
        }
    }

    // Members of the focal community or its polar opposite: any pre-ban post.
    let empty = BTreeSet::new();
    let anchor_users: BTreeSet<&str> = corpus
        .users
        .values()
        .filter(|a| {
            a.per_community_counts.contains_key(focal)
                || a.per_community_counts.contains_key(polar_opposite)
        })
        .map(|a| a.user.as_str())
        .collect();

    let mut nodes: BTreeSet<String> = BTreeSet::new();
    nodes.insert(focal.to_string());
    nodes.insert(polar_opposite.to_string());
    for (&community, users) in &active_users {
        if community == focal || community == polar_opposite {
            continue;
        }
        let anchored = users.intersection(&anchor_users).count() as u32;
        if anchored >= relevance_min_users {
            nodes.insert(community.to_string());
        }
    }

    let node_vec: Vec<String> = nodes.into_iter().collect();
    let mut edge_list = Vec::new();
    for (i, a) in node_vec.iter().enumerate() {
        let ua = active_users.get(a.as_str()).unwrap_or(&empty);
        for b in &node_vec[i + 1..] {
            let ub = active_users.get(b.as_str()).unwrap_or(&empty);
            let shared = ua.intersection(ub).count() as u32;
            if shared >= EDGE_MIN_SHARED_USERS {
                edge_list.push((a.clone(), b.clone(), shared));
            }
        }
    }

    Ok(CommunityGraph::from_edges(node_vec, edge_list))
}
