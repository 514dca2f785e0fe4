//! Balanced subgraph sampling.
//!
//! Starting from a pivot photo, repeatedly pick a frontier node uniformly,
//! group its not-yet-sampled incident edges by type, pick a type uniformly
//! and then an edge of that type uniformly. Dense structural edge types
//! therefore cannot crowd out rare association edges. After the loop,
//! context completion attaches the parent Photo of every clue and the
//! parent Photoset of every photo.

use std::collections::HashSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GraphError, MemoryGraph, NodeKind};

pub const DEFAULT_EDGE_LIMIT: usize = 40;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subgraph {
    pub pivot: String,
    /// Nodes in the order they joined the subgraph.
    pub nodes: Vec<String>,
    /// Graph edge indices chosen by the sampling loop, in order.
    pub sampled_edges: Vec<usize>,
    /// Graph edge indices added by context completion.
    pub completion_edges: Vec<usize>,
}

impl Subgraph {
    pub fn contains_node(&self, id: &str) -> bool {
        self.nodes.iter().any(|n| n == id)
    }

    pub fn edge_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.sampled_edges.iter().chain(&self.completion_edges).copied()
    }

    pub fn contains_edge(&self, idx: usize) -> bool {
        self.edge_indices().any(|e| e == idx)
    }
}

/// One observable decision of the sampling loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SamplerStep {
    /// `node` had no unsampled incident edges and left the frontier.
    Removed { node: String },
    /// An edge of type `type_label` was sampled from `node`.
    Expanded {
        node: String,
        type_label: String,
        edge: usize,
    },
}

pub fn sample_subgraph(graph: &MemoryGraph, pivot: &str, limit: usize, seed: u64) -> Result<Subgraph, GraphError> {
    sample_subgraph_observed(graph, pivot, limit, seed, |_| {})
}

/// [`sample_subgraph`] reporting every loop decision to `observe`.
pub fn sample_subgraph_observed(
    graph: &MemoryGraph,
    pivot: &str,
    limit: usize,
    seed: u64,
    mut observe: impl FnMut(&SamplerStep),
) -> Result<Subgraph, GraphError> {
    let node = graph
        .node(pivot)
        .ok_or_else(|| GraphError::PivotMissing(pivot.to_string()))?;
    if node.kind != NodeKind::Photo {
        return Err(GraphError::PivotNotPhoto(pivot.to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Subgraph {
        pivot: pivot.to_string(),
        nodes: vec![pivot.to_string()],
        sampled_edges: Vec::new(),
        completion_edges: Vec::new(),
    };
    let mut in_nodes: HashSet<String> = HashSet::from([pivot.to_string()]);
    let mut in_edges: HashSet<usize> = HashSet::new();
    let mut frontier: Vec<String> = vec![pivot.to_string()];

    while s.sampled_edges.len() < limit && !frontier.is_empty() {
        let at = rng.gen_range(0..frontier.len());
        let u = frontier[at].clone();
        let mut groups = graph.incident_by_type(&u);
        for edges in groups.values_mut() {
            edges.retain(|e| !in_edges.contains(e));
        }
        groups.retain(|_, edges| !edges.is_empty());
        if groups.is_empty() {
            frontier.remove(at);
            observe(&SamplerStep::Removed { node: u });
            continue;
        }
        let t = rng.gen_range(0..groups.len());
        let (label, edges) = groups.into_iter().nth(t).expect("index within group count");
        let edge = edges[rng.gen_range(0..edges.len())];
        observe(&SamplerStep::Expanded {
            node: u.clone(),
            type_label: label.to_string(),
            edge,
        });
        in_edges.insert(edge);
        s.sampled_edges.push(edge);
        let v = graph.other_end(edge, &u).to_string();
        if in_nodes.insert(v.clone()) {
            s.nodes.push(v.clone());
            frontier.push(v);
        }
    }
    complete_context(&mut s, graph);
    Ok(s)
}

/// Attach parents: the Photo of every clue, then the Photoset of every photo
/// (including photos added in the first pass). Idempotent.
pub fn complete_context(s: &mut Subgraph, graph: &MemoryGraph) {
    for kind in [NodeKind::VisualClue, NodeKind::Photo] {
        let mut i = 0;
        while i < s.nodes.len() {
            let id = s.nodes[i].clone();
            i += 1;
            if graph.node(&id).map(|n| n.kind) != Some(kind) {
                continue;
            }
            let Some(edge) = graph.parent_edge(&id) else {
                continue;
            };
            if s.contains_edge(edge) {
                continue;
            }
            let parent = graph.edge(edge).src.clone();
            if !s.contains_node(&parent) {
                s.nodes.push(parent);
            }
            s.completion_edges.push(edge);
        }
    }
}
