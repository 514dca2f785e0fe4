//! Association mining: retrieve candidate photos for each visual clue and
//! keep the ones a verifier confirms.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{photo_node_id, GraphEdge, GraphError, MemoryGraph, NodeKind};
use crate::chat::{Attachment, ChatClient, Message};
use crate::client::ClientError;
use crate::corpus::{Corpus, Photo};
use crate::toolkit::resolve_image;
use crate::vecindex::{Embedder, EmbeddingIndex, QueryCue};

/// Confirmation rubric handed to model-backed verifiers.
pub const VERIFIER_RUBRIC: &str = "Decide whether the candidate photo contains the same visual element as the clue from the source photo. \
Confirm only if at least one holds: (1) a unique identifier is present in both, such as a license plate, serial number or distinctive defect; \
(2) highly matched visual features are supported by metadata, such as similar items in a private space or the same location photographed at different times; \
(3) a clear reference relationship exists, where the source content appears inside the candidate, for example on a screen, poster or picture frame; \
(4) the two are different manifestations of the same theme, such as a physical object and its promotional poster. \
Reject when the entities have clearly different features, belong to the same category but are different individuals, or are unrelated.";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiningConfig {
    pub k_in: usize,
    pub k_out: usize,
    /// Candidates must score strictly above this cosine similarity.
    pub similarity_floor: f64,
}

impl Default for MiningConfig {
    fn default() -> Self {
        Self {
            k_in: 5,
            k_out: 5,
            similarity_floor: 0.0,
        }
    }
}

pub struct VerifyRequest<'a> {
    pub clue_id: &'a str,
    pub clue: &'a str,
    pub source: &'a Photo,
    pub candidate: &'a Photo,
    pub same_photoset: bool,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub confirmed: bool,
    pub rationale: String,
}

pub trait Verifier: Send + Sync {
    fn verify(&self, req: &VerifyRequest<'_>) -> Result<Verdict, ClientError>;
}

/// Verifier defined by a closure, for scripted tests.
pub struct FnVerifier<F>(pub F);

impl<F> Verifier for FnVerifier<F>
where
    F: Fn(&VerifyRequest<'_>) -> Result<Verdict, ClientError> + Send + Sync,
{
    fn verify(&self, req: &VerifyRequest<'_>) -> Result<Verdict, ClientError> {
        (self.0)(req)
    }
}

/// Rule-based stand-in: confirms when every word of the clue appears in the
/// candidate's caption.
#[derive(Debug, Clone, Copy, Default)]
pub struct CaptionVerifier;

fn words(text: &str) -> HashSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| w.len() > 1)
        .map(str::to_lowercase)
        .collect()
}

impl Verifier for CaptionVerifier {
    fn verify(&self, req: &VerifyRequest<'_>) -> Result<Verdict, ClientError> {
        let caption = words(req.candidate.caption.as_deref().unwrap_or(""));
        let clue = words(req.clue);
        let confirmed = !clue.is_empty() && clue.is_subset(&caption);
        Ok(Verdict {
            confirmed,
            rationale: if confirmed {
                format!(
                    "photo {} shows the same {} as photo {}",
                    req.candidate.photo_id, req.clue, req.source.photo_id
                )
            } else {
                format!(
                    "caption of photo {} does not mention {}",
                    req.candidate.photo_id, req.clue
                )
            },
        })
    }
}

/// Verifier backed by a vision-capable chat model.
pub struct ChatVerifier<C> {
    client: C,
    image_root: Option<std::path::PathBuf>,
}

impl<C: ChatClient> ChatVerifier<C> {
    pub fn new(client: C, image_root: Option<std::path::PathBuf>) -> Self {
        Self { client, image_root }
    }

    fn attachment(&self, label: &str, photo: &Photo) -> Attachment {
        let url = self
            .client
            .supports_images()
            .then_some(photo.image_ref.as_deref())
            .flatten()
            .and_then(|r| resolve_image(r, self.image_root.as_deref()));
        match url {
            Some(url) => Attachment::Image {
                photo_id: photo.photo_id.clone(),
                url,
            },
            None => Attachment::Text {
                photo_id: photo.photo_id.clone(),
                text: format!(
                    "{label} {}: {} | time: {} | address: {}",
                    photo.photo_id,
                    photo.caption.as_deref().unwrap_or("(no caption)"),
                    photo.time_iso(),
                    photo.address.as_deref().unwrap_or("unknown"),
                ),
            },
        }
    }
}

impl<C: ChatClient> Verifier for ChatVerifier<C> {
    fn verify(&self, req: &VerifyRequest<'_>) -> Result<Verdict, ClientError> {
        let mut ask = Message::user(format!(
            "Clue from the source photo: {}\nSource and candidate are {} the same photoset.\n\
Reply with a JSON object {{\"confirmed\": true|false, \"rationale\": \"one sentence\"}}.",
            req.clue,
            if req.same_photoset { "in" } else { "not in" }
        ));
        ask.attachments = vec![
            self.attachment("source", req.source),
            self.attachment("candidate", req.candidate),
        ];
        let reply = self.client.complete(&[Message::system(VERIFIER_RUBRIC), ask], &[])?;
        let text = reply.content;
        let json = text
            .find('{')
            .zip(text.rfind('}'))
            .filter(|(a, b)| a < b)
            .map(|(a, b)| &text[a..=b])
            .ok_or_else(|| ClientError::Protocol(format!("verifier reply has no JSON object: {text}")))?;
        serde_json::from_str(json).map_err(|e| ClientError::Protocol(format!("verifier reply: {e}")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MiningReport {
    pub edges: Vec<GraphEdge>,
    pub clues: usize,
    pub candidates: usize,
    pub confirmed: usize,
    /// Verifier transport failures; the candidate was skipped.
    pub skipped: usize,
    /// Confirmations without a rationale, which cannot become edges.
    pub invalid: usize,
}

struct ClueOutcome {
    edges: Vec<GraphEdge>,
    candidates: usize,
    confirmed: usize,
    skipped: usize,
    invalid: usize,
}

/// Mine association edges for every clue. Edges are returned in clue order
/// and then candidate order (within-photoset first); the graph is not modified.
pub fn mine_associations(
    graph: &MemoryGraph,
    corpus: &Corpus,
    index: &EmbeddingIndex,
    embedder: &dyn Embedder,
    verifier: &dyn Verifier,
    config: &MiningConfig,
) -> Result<MiningReport, GraphError> {
    let clues: Vec<(&str, &str, &str)> = graph
        .nodes()
        .iter()
        .filter(|n| n.kind == NodeKind::VisualClue)
        .map(|n| {
            (
                n.node_id.as_str(),
                n.attrs.get("description").map(String::as_str).unwrap_or(""),
                n.attrs.get("photo_id").map(String::as_str).unwrap_or(""),
            )
        })
        .collect();

    let outcomes: Vec<Result<ClueOutcome, GraphError>> = clues
        .par_iter()
        .map(|&(clue_id, description, source_id)| {
            mine_clue(
                graph,
                corpus,
                index,
                embedder,
                verifier,
                config,
                clue_id,
                description,
                source_id,
            )
        })
        .collect();

    let mut report = MiningReport {
        clues: clues.len(),
        ..MiningReport::default()
    };
    for o in outcomes {
        let o = o?;
        report.edges.extend(o.edges);
        report.candidates += o.candidates;
        report.confirmed += o.confirmed;
        report.skipped += o.skipped;
        report.invalid += o.invalid;
    }
    if report.skipped > 0 {
        log::warn!("{} candidates skipped after verifier failures", report.skipped);
    }
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn mine_clue(
    graph: &MemoryGraph,
    corpus: &Corpus,
    index: &EmbeddingIndex,
    embedder: &dyn Embedder,
    verifier: &dyn Verifier,
    config: &MiningConfig,
    clue_id: &str,
    description: &str,
    source_id: &str,
) -> Result<ClueOutcome, GraphError> {
    let source = corpus
        .photo(source_id)
        .map_err(|_| GraphError::UnknownPhoto(source_id.to_string()))?;
    let cue = QueryCue {
        text: (!description.trim().is_empty()).then(|| description.to_string()),
        photo_ids: vec![source_id.to_string()],
    };
    let query = index.fuse_query(&cue, Some(embedder))?;
    let members: HashSet<&str> = corpus
        .photoset(&source.photoset_id)
        .map(|s| s.photo_ids.iter().map(String::as_str).collect())
        .unwrap_or_default();
    let inside: Vec<String> = index
        .ids()
        .iter()
        .filter(|id| id.as_str() != source_id && members.contains(id.as_str()))
        .cloned()
        .collect();
    let outside: Vec<String> = index
        .ids()
        .iter()
        .filter(|id| !members.contains(id.as_str()))
        .cloned()
        .collect();

    let mut out = ClueOutcome {
        edges: Vec::new(),
        candidates: 0,
        confirmed: 0,
        skipped: 0,
        invalid: 0,
    };
    for (scope, k, same) in [(&inside, config.k_in, true), (&outside, config.k_out, false)] {
        if scope.is_empty() || k == 0 {
            continue;
        }
        for hit in index.search_topk(&query, k, Some(scope))? {
            if hit.score <= config.similarity_floor {
                continue;
            }
            let candidate = corpus
                .photo(&hit.photo_id)
                .map_err(|_| GraphError::UnknownPhoto(hit.photo_id.clone()))?;
            out.candidates += 1;
            let req = VerifyRequest {
                clue_id,
                clue: description,
                source,
                candidate,
                same_photoset: same,
                score: hit.score,
            };
            match verifier.verify(&req) {
                Ok(v) if v.confirmed && !v.rationale.trim().is_empty() => {
                    out.confirmed += 1;
                    let target = photo_node_id(&hit.photo_id);
                    if graph.node(&target).is_some() {
                        out.edges.push(GraphEdge::association(clue_id, &target, &v.rationale));
                    }
                }
                Ok(v) if v.confirmed => out.invalid += 1,
                Ok(_) => {}
                Err(e) => {
                    log::warn!("verifier failed for {clue_id} -> {}: {e}", hit.photo_id);
                    out.skipped += 1;
                }
            }
        }
    }
    Ok(out)
}

impl MemoryGraph {
    /// Add mined association edges; returns how many were new.
    pub fn add_associations(&mut self, edges: &[GraphEdge]) -> Result<usize, GraphError> {
        let before = self.edges().len();
        for e in edges {
            self.add_edge(e.clone())?;
        }
        Ok(self.edges().len() - before)
    }
}
