//! Heterogeneous memory graph for query synthesis.
//!
//! Photo, Photoset, VisualClue and Person nodes are joined by structural
//! edges (`contains`, `depicts_clue`, `depicts_person`) and by verified
//! association edges (`same_clue_as`) that link a clue to other photos
//! showing the same entity.

mod mine;
mod sample;
mod serialize;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::vecindex::IndexError;

pub use mine::{
    mine_associations, CaptionVerifier, ChatVerifier, FnVerifier, MiningConfig, MiningReport, Verdict, Verifier,
    VerifyRequest, VERIFIER_RUBRIC,
};
pub use sample::{
    complete_context, sample_subgraph, sample_subgraph_observed, SamplerStep, Subgraph, DEFAULT_EDGE_LIMIT,
};
pub use serialize::{
    check_candidate, serialize_subgraph, ChatQueryGenerator, GeneratedQuery, QueryGenerator, SYNTHESIS_RUBRIC,
};

pub const CONTAINS: &str = "contains";
pub const DEPICTS_CLUE: &str = "depicts_clue";
pub const DEPICTS_PERSON: &str = "depicts_person";
pub const SAME_CLUE_AS: &str = "same_clue_as";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Photo,
    Photoset,
    VisualClue,
    Person,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NodeKind::Photo => "Photo",
            NodeKind::Photoset => "Photoset",
            NodeKind::VisualClue => "VisualClue",
            NodeKind::Person => "Person",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub node_id: String,
    pub kind: NodeKind,
    #[serde(default)]
    pub attrs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeCategory {
    Structural,
    Association,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub src: String,
    pub dst: String,
    pub category: EdgeCategory,
    pub type_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

impl GraphEdge {
    pub fn structural(src: &str, dst: &str, label: &str) -> Self {
        Self {
            src: src.into(),
            dst: dst.into(),
            category: EdgeCategory::Structural,
            type_label: label.into(),
            rationale: None,
        }
    }

    pub fn association(clue: &str, photo: &str, rationale: &str) -> Self {
        Self {
            src: clue.into(),
            dst: photo.into(),
            category: EdgeCategory::Association,
            type_label: SAME_CLUE_AS.into(),
            rationale: Some(rationale.into()),
        }
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("annotation references unknown photo {0:?}")]
    UnknownPhoto(String),
    #[error("duplicate node {0:?}")]
    DuplicateNode(String),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("invalid edge {src} -[{label}]-> {dst}: {reason}")]
    InvalidEdge {
        src: String,
        dst: String,
        label: String,
        reason: String,
    },
    #[error("pivot {0:?} is not in the graph")]
    PivotMissing(String),
    #[error("pivot {0:?} is not a Photo node")]
    PivotNotPhoto(String),
    #[error("subgraph is incomplete: {0}")]
    Incomplete(String),
    #[error(transparent)]
    Index(#[from] IndexError),
}

pub fn photo_node_id(photo_id: &str) -> String {
    format!("photo:{photo_id}")
}

pub fn photoset_node_id(photoset_id: &str) -> String {
    format!("photoset:{photoset_id}")
}

pub fn person_node_id(cluster: &str) -> String {
    format!("person:{cluster}")
}

pub fn clue_node_id(photo_id: &str, ordinal: usize) -> String {
    format!("clue:{photo_id}:{ordinal}")
}

/// The graph with an undirected incidence view over its directed edges.
#[derive(Debug, Clone, Default)]
pub struct MemoryGraph {
    nodes: Vec<GraphNode>,
    slots: HashMap<String, usize>,
    edges: Vec<GraphEdge>,
    incident: Vec<Vec<usize>>,
    edge_keys: HashMap<(String, String, String), usize>,
}

impl MemoryGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, node: GraphNode) -> Result<(), GraphError> {
        if self.slots.contains_key(&node.node_id) {
            return Err(GraphError::DuplicateNode(node.node_id));
        }
        self.slots.insert(node.node_id.clone(), self.nodes.len());
        self.nodes.push(node);
        self.incident.push(Vec::new());
        Ok(())
    }

    /// Add an edge after checking the kind and direction rules. An identical
    /// (src, dst, label) edge is not duplicated; its index is returned.
    pub fn add_edge(&mut self, edge: GraphEdge) -> Result<usize, GraphError> {
        let invalid = |reason: &str| GraphError::InvalidEdge {
            src: edge.src.clone(),
            dst: edge.dst.clone(),
            label: edge.type_label.clone(),
            reason: reason.into(),
        };
        let s = *self
            .slots
            .get(&edge.src)
            .ok_or_else(|| GraphError::UnknownNode(edge.src.clone()))?;
        let d = *self
            .slots
            .get(&edge.dst)
            .ok_or_else(|| GraphError::UnknownNode(edge.dst.clone()))?;
        if s == d {
            return Err(invalid("self-loop"));
        }
        let kinds = (self.nodes[s].kind, self.nodes[d].kind);
        let expected = match (edge.category, edge.type_label.as_str()) {
            (EdgeCategory::Structural, CONTAINS) => (NodeKind::Photoset, NodeKind::Photo),
            (EdgeCategory::Structural, DEPICTS_CLUE) => (NodeKind::Photo, NodeKind::VisualClue),
            (EdgeCategory::Structural, DEPICTS_PERSON) => (NodeKind::Photo, NodeKind::Person),
            (EdgeCategory::Association, SAME_CLUE_AS) => (NodeKind::VisualClue, NodeKind::Photo),
            _ => return Err(invalid("unknown category/label combination")),
        };
        if kinds != expected {
            return Err(invalid(&format!(
                "expected {} -> {}, got {} -> {}",
                expected.0, expected.1, kinds.0, kinds.1
            )));
        }
        if edge.category == EdgeCategory::Association && edge.rationale.as_deref().is_none_or(|r| r.trim().is_empty()) {
            return Err(invalid("association edges need a non-empty rationale"));
        }
        let key = (edge.src.clone(), edge.dst.clone(), edge.type_label.clone());
        if let Some(&existing) = self.edge_keys.get(&key) {
            return Ok(existing);
        }
        let idx = self.edges.len();
        self.edges.push(edge);
        self.incident[s].push(idx);
        self.incident[d].push(idx);
        self.edge_keys.insert(key, idx);
        Ok(idx)
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn node(&self, id: &str) -> Option<&GraphNode> {
        self.slots.get(id).map(|&i| &self.nodes[i])
    }

    pub fn edge(&self, idx: usize) -> &GraphEdge {
        &self.edges[idx]
    }

    /// Indices of edges touching `id`, in either direction.
    pub fn incident(&self, id: &str) -> &[usize] {
        self.slots.get(id).map_or(&[], |&i| &self.incident[i])
    }

    /// Incident edges grouped by type label.
    pub fn incident_by_type(&self, id: &str) -> BTreeMap<&str, Vec<usize>> {
        let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for &e in self.incident(id) {
            groups.entry(self.edges[e].type_label.as_str()).or_default().push(e);
        }
        groups
    }

    /// The endpoint of edge `idx` opposite `from`.
    pub fn other_end(&self, idx: usize, from: &str) -> &str {
        let e = &self.edges[idx];
        if e.src == from {
            &e.dst
        } else {
            &e.src
        }
    }

    /// The structural parent of a Photo (its Photoset) or VisualClue (its Photo).
    pub fn parent_edge(&self, id: &str) -> Option<usize> {
        let label = match self.node(id)?.kind {
            NodeKind::Photo => CONTAINS,
            NodeKind::VisualClue => DEPICTS_CLUE,
            _ => return None,
        };
        self.incident(id)
            .iter()
            .copied()
            .find(|&e| self.edges[e].type_label == label && self.edges[e].dst == id)
    }

    pub fn count_kind(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    pub fn associations(&self) -> impl Iterator<Item = &GraphEdge> {
        self.edges.iter().filter(|e| e.category == EdgeCategory::Association)
    }

    /// One JSON object per line: nodes first, then edges.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            out.push_str(&serde_json::to_string(&DumpLine::Node(n.clone())).expect("node serializes"));
            out.push('\n');
        }
        for e in &self.edges {
            out.push_str(&serde_json::to_string(&DumpLine::Edge(e.clone())).expect("edge serializes"));
            out.push('\n');
        }
        out
    }

    pub fn parse_jsonl(text: &str) -> Result<Self, GraphError> {
        let mut g = Self::new();
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let line: DumpLine = serde_json::from_str(raw).map_err(|e| GraphError::Malformed {
                line: i + 1,
                message: e.to_string(),
            })?;
            match line {
                DumpLine::Node(n) => g.add_node(n)?,
                DumpLine::Edge(e) => {
                    g.add_edge(e)?;
                }
            }
        }
        Ok(g)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        Self::parse_jsonl(&read(path.as_ref())?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum DumpLine {
    Node(GraphNode),
    Edge(GraphEdge),
}

fn read(path: &Path) -> Result<String, GraphError> {
    fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClueAnnotation {
    pub photo_id: String,
    pub clues: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonAnnotation {
    pub photo_id: String,
    pub persons: Vec<String>,
}

fn parse_lines<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, GraphError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| GraphError::Malformed {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn parse_clue_annotations(text: &str) -> Result<Vec<ClueAnnotation>, GraphError> {
    parse_lines(text)
}

pub fn parse_person_annotations(text: &str) -> Result<Vec<PersonAnnotation>, GraphError> {
    parse_lines(text)
}

pub fn load_clue_annotations(path: impl AsRef<Path>) -> Result<Vec<ClueAnnotation>, GraphError> {
    parse_clue_annotations(&read(path.as_ref())?)
}

pub fn load_person_annotations(path: impl AsRef<Path>) -> Result<Vec<PersonAnnotation>, GraphError> {
    parse_person_annotations(&read(path.as_ref())?)
}

/// Structural graph from a corpus plus clue and person annotations.
pub fn build_graph(
    corpus: &Corpus,
    clues: &[ClueAnnotation],
    persons: &[PersonAnnotation],
) -> Result<MemoryGraph, GraphError> {
    for id in clues
        .iter()
        .map(|a| &a.photo_id)
        .chain(persons.iter().map(|a| &a.photo_id))
    {
        if !corpus.contains(id) {
            return Err(GraphError::UnknownPhoto(id.clone()));
        }
    }
    let mut g = MemoryGraph::new();
    for set in corpus.photosets() {
        let set_node = photoset_node_id(&set.photoset_id);
        g.add_node(GraphNode {
            node_id: set_node.clone(),
            kind: NodeKind::Photoset,
            attrs: BTreeMap::from([("photoset_id".to_string(), set.photoset_id.clone())]),
        })?;
        for pid in &set.photo_ids {
            let photo = corpus.photo(pid).map_err(|_| GraphError::UnknownPhoto(pid.clone()))?;
            let mut attrs = BTreeMap::from([
                ("photo_id".to_string(), pid.clone()),
                ("time".to_string(), photo.time_iso()),
            ]);
            if let Some(a) = &photo.address {
                attrs.insert("address".into(), a.clone());
            }
            if let Some(c) = &photo.caption {
                attrs.insert("caption".into(), c.clone());
            }
            let node = photo_node_id(pid);
            g.add_node(GraphNode {
                node_id: node.clone(),
                kind: NodeKind::Photo,
                attrs,
            })?;
            g.add_edge(GraphEdge::structural(&set_node, &node, CONTAINS))?;
        }
    }
    let mut ordinals: HashMap<&str, usize> = HashMap::new();
    for ann in clues {
        for text in &ann.clues {
            let n = ordinals.entry(ann.photo_id.as_str()).or_default();
            let id = clue_node_id(&ann.photo_id, *n);
            *n += 1;
            g.add_node(GraphNode {
                node_id: id.clone(),
                kind: NodeKind::VisualClue,
                attrs: BTreeMap::from([
                    ("description".to_string(), text.clone()),
                    ("photo_id".to_string(), ann.photo_id.clone()),
                ]),
            })?;
            g.add_edge(GraphEdge::structural(&photo_node_id(&ann.photo_id), &id, DEPICTS_CLUE))?;
        }
    }
    for ann in persons {
        for cluster in &ann.persons {
            let id = person_node_id(cluster);
            if g.node(&id).is_none() {
                g.add_node(GraphNode {
                    node_id: id.clone(),
                    kind: NodeKind::Person,
                    attrs: BTreeMap::from([("cluster".to_string(), cluster.clone())]),
                })?;
            }
            g.add_edge(GraphEdge::structural(
                &photo_node_id(&ann.photo_id),
                &id,
                DEPICTS_PERSON,
            ))?;
        }
    }
    Ok(g)
}
