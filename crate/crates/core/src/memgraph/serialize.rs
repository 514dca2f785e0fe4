//! Subgraph serialization and the query-generator contract.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{photo_node_id, GraphError, MemoryGraph, NodeKind, Subgraph};
use crate::chat::{ChatClient, Message};
use crate::client::ClientError;
use crate::corpus::Corpus;
use crate::evalkit::QueryType;

/// Instructions a query generator must follow when turning a serialized
/// subgraph into benchmark queries.
pub const SYNTHESIS_RUBRIC: &str = "\
You write retrieval queries over a personal photo collection, given a subgraph of its memory graph.
Rules:
1. Visual ambiguity: the target photos must not be identifiable from their own visual content alone; \
similar-looking photos from other events must exist.
2. Contextual identifiability: the targets must be uniquely determined once the context in the subgraph \
(time, place, clues shared with other photos, people) is taken into account.
3. Strong-to-weak reasoning flow: the query starts from a distinctive, easily retrieved anchor and narrows \
to the targets through weaker cues; the anchor's visual features must not be imposed on the targets.
4. Every gold photo must appear in the subgraph. Do not mention photo ids, exact timestamps or coordinates.
Reply with a JSON array of objects {\"text\", \"type\": \"intra_event\"|\"inter_event\", \"gold\": [photo ids], \"rationale\"}.";

fn section_of(kind: NodeKind) -> usize {
    match kind {
        NodeKind::Photoset => 0,
        NodeKind::Photo => 1,
        NodeKind::VisualClue => 2,
        NodeKind::Person => 3,
    }
}

fn check_complete(s: &Subgraph, graph: &MemoryGraph) -> Result<(), GraphError> {
    for id in &s.nodes {
        let node = graph.node(id).ok_or_else(|| GraphError::UnknownNode(id.clone()))?;
        if !matches!(node.kind, NodeKind::Photo | NodeKind::VisualClue) {
            continue;
        }
        let linked = graph
            .parent_edge(id)
            .filter(|&e| s.contains_edge(e) && s.contains_node(&graph.edge(e).src));
        if linked.is_none() {
            return Err(GraphError::Incomplete(format!("{} {id} has no parent", node.kind)));
        }
    }
    Ok(())
}

/// Render a completed subgraph as sectioned text.
///
/// Sections appear in the order Photoset, Photo, VisualClue, Person and empty
/// sections are omitted. Each node lists its outgoing subgraph edges, with
/// association rationales quoted verbatim.
pub fn serialize_subgraph(s: &Subgraph, graph: &MemoryGraph, corpus: &Corpus) -> Result<String, GraphError> {
    check_complete(s, graph)?;
    let mut sections: [Vec<&str>; 4] = Default::default();
    for id in &s.nodes {
        let node = graph.node(id).ok_or_else(|| GraphError::UnknownNode(id.clone()))?;
        sections[section_of(node.kind)].push(id);
    }
    let mut out = String::new();
    for (title, mut ids) in ["Photoset", "Photo", "VisualClue", "Person"].into_iter().zip(sections) {
        if ids.is_empty() {
            continue;
        }
        ids.sort_unstable();
        let _ = writeln!(out, "# {title}");
        for id in ids {
            let node = graph.node(id).expect("checked above");
            out.push_str(id);
            match node.kind {
                NodeKind::Photo => {
                    let photo_id = node.attrs.get("photo_id").map(String::as_str).unwrap_or_default();
                    let photo = corpus
                        .photo(photo_id)
                        .map_err(|_| GraphError::UnknownPhoto(photo_id.to_string()))?;
                    let _ = write!(
                        out,
                        " | time: {} | address: {}",
                        photo.time_iso(),
                        photo.address.as_deref().unwrap_or("unknown")
                    );
                    if let Some(c) = &photo.caption {
                        let _ = write!(out, " | caption: {c}");
                    }
                }
                _ => {
                    for (k, v) in node.attrs.iter().filter(|(k, _)| k.as_str() != "photo_id") {
                        let _ = write!(out, " | {k}: {v}");
                    }
                }
            }
            out.push('\n');
            let mut edges: Vec<_> = s
                .edge_indices()
                .map(|e| graph.edge(e))
                .filter(|e| e.src == id)
                .collect();
            edges.sort_by(|a, b| (&a.type_label, &a.dst).cmp(&(&b.type_label, &b.dst)));
            for e in edges {
                let _ = write!(out, "  {} -> {}", e.type_label, e.dst);
                if let Some(r) = &e.rationale {
                    let _ = write!(out, " | rationale: {r}");
                }
                out.push('\n');
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedQuery {
    pub text: String,
    #[serde(rename = "type", alias = "query_type")]
    pub query_type: QueryType,
    pub gold: Vec<String>,
    #[serde(default)]
    pub rationale: String,
}

/// Turns a serialized subgraph into candidate queries following
/// [`SYNTHESIS_RUBRIC`].
pub trait QueryGenerator: Send + Sync {
    fn generate(&self, serialized: &str) -> Result<Vec<GeneratedQuery>, ClientError>;
}

pub struct ChatQueryGenerator<C> {
    client: C,
}

impl<C: ChatClient> ChatQueryGenerator<C> {
    pub fn new(client: C) -> Self {
        Self { client }
    }
}

impl<C: ChatClient> QueryGenerator for ChatQueryGenerator<C> {
    fn generate(&self, serialized: &str) -> Result<Vec<GeneratedQuery>, ClientError> {
        let reply = self.client.complete(
            &[Message::system(SYNTHESIS_RUBRIC), Message::user(serialized.to_string())],
            &[],
        )?;
        let text = reply.content;
        let json = text
            .find('[')
            .zip(text.rfind(']'))
            .filter(|(a, b)| a < b)
            .map(|(a, b)| &text[a..=b])
            .ok_or_else(|| ClientError::Protocol(format!("generator reply has no JSON array: {text}")))?;
        serde_json::from_str(json).map_err(|e| ClientError::Protocol(format!("generator reply: {e}")))
    }
}

/// A candidate is usable when its gold set is non-empty and lies inside the
/// subgraph it was generated from.
pub fn check_candidate(q: &GeneratedQuery, s: &Subgraph) -> Result<(), GraphError> {
    if q.gold.is_empty() {
        return Err(GraphError::Incomplete("candidate query has an empty gold set".into()));
    }
    match q.gold.iter().find(|id| !s.contains_node(&photo_node_id(id))) {
        Some(id) => Err(GraphError::UnknownPhoto(id.clone())),
        None => Ok(()),
    }
}
