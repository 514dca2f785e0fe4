//! Exhaustive cosine top-k search over per-photo embeddings.

mod embed;

pub use embed::{Embedder, HashEmbedder, HttpEmbedder};

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::ClientError;
use crate::corpus::Corpus;

/// Norm below which a vector is treated as zero.
pub const DEGENERATE_NORM: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed embeddings record: {message}")]
    Malformed { line: usize, message: String },
    #[error("dimension mismatch for {id:?}: expected {expected}, got {got}")]
    DimMismatch { id: String, expected: usize, got: usize },
    #[error("zero vector for {0:?} cannot be normalized")]
    ZeroVector(String),
    #[error("embedding id {0:?} is not in the corpus")]
    NotInCorpus(String),
    #[error("duplicate embedding id {0:?}")]
    Duplicate(String),
    #[error("empty query cue")]
    EmptyCue,
    #[error("no embedder configured for text cues")]
    EmbedderUnavailable,
    #[error("embedder failed: {0}")]
    Embedder(#[from] ClientError),
    #[error("unknown reference photo {0:?}")]
    UnknownReference(String),
    #[error("query cues cancel out (mean vector has zero norm)")]
    DegenerateMean,
    #[error("search scope is empty")]
    EmptyScope,
    #[error("scope photo {0:?} is not in the index")]
    UnknownScopePhoto(String),
    #[error("top_k must be at least 1")]
    ZeroTopK,
}

/// Text and/or reference photos describing what to look for.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryCue {
    pub text: Option<String>,
    pub photo_ids: Vec<String>,
}

impl QueryCue {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: Some(text.into()),
            photo_ids: Vec::new(),
        }
    }

    pub fn photos(ids: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            text: None,
            photo_ids: ids.into_iter().map(Into::into).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.text.as_deref().is_none_or(|t| t.trim().is_empty()) && self.photo_ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredPhoto {
    pub photo_id: String,
    pub score: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    dim: usize,
    count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    id: String,
    vec: Vec<f64>,
}

/// Scale `v` to unit length, or `None` when its norm is below [`DEGENERATE_NORM`].
pub fn normalize(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() || norm < DEGENERATE_NORM {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Some(v)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Unit-normalized photo embeddings for one user's corpus.
#[derive(Debug, Clone)]
pub struct EmbeddingIndex {
    dim: usize,
    ids: Vec<String>,
    slots: HashMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingIndex {
    /// Build from raw rows; every vector is normalized and checked against `dim`.
    pub fn from_rows(dim: usize, rows: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<Self, IndexError> {
        let mut index = Self {
            dim,
            ids: Vec::new(),
            slots: HashMap::new(),
            data: Vec::new(),
        };
        for (id, vec) in rows {
            index.push(id, vec)?;
        }
        Ok(index)
    }

    fn push(&mut self, id: String, vec: Vec<f64>) -> Result<(), IndexError> {
        if vec.len() != self.dim {
            return Err(IndexError::DimMismatch {
                id,
                expected: self.dim,
                got: vec.len(),
            });
        }
        if self.slots.contains_key(&id) {
            return Err(IndexError::Duplicate(id));
        }
        let unit = normalize(vec).ok_or_else(|| IndexError::ZeroVector(id.clone()))?;
        self.slots.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.data.extend(unit);
        Ok(())
    }

    /// Load an embeddings file and cross-check ids against `corpus`.
    pub fn load(path: impl AsRef<Path>, corpus: &Corpus) -> Result<Self, IndexError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| IndexError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, corpus)
    }

    pub fn parse(text: &str, corpus: &Corpus) -> Result<Self, IndexError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.trim().is_empty());
        let (hline, htext) = lines.next().ok_or(IndexError::Malformed {
            line: 1,
            message: "missing header".into(),
        })?;
        let header: Header = serde_json::from_str(htext).map_err(|e| IndexError::Malformed {
            line: hline,
            message: format!("header: {e}"),
        })?;
        if header.dim == 0 {
            return Err(IndexError::Malformed {
                line: hline,
                message: "dim must be positive".into(),
            });
        }
        let mut index = Self::from_rows(header.dim, std::iter::empty())?;
        for (line, raw) in lines {
            let row: Row = serde_json::from_str(raw).map_err(|e| IndexError::Malformed {
                line,
                message: e.to_string(),
            })?;
            if !corpus.contains(&row.id) {
                return Err(IndexError::NotInCorpus(row.id));
            }
            index.push(row.id, row.vec)?;
        }
        if index.len() != header.count {
            return Err(IndexError::Malformed {
                line: hline,
                message: format!("header count {} but {} rows", header.count, index.len()),
            });
        }
        let gaps = index.coverage_gaps(corpus);
        if !gaps.is_empty() {
            log::warn!(
                "{} of {} corpus photos have no embedding (first: {})",
                gaps.len(),
                corpus.len(),
                gaps[0]
            );
        }
        Ok(index)
    }

    /// Serialize in the embeddings file format (rows sorted by id).
    pub fn to_jsonl(&self) -> String {
        let mut order: Vec<usize> = (0..self.ids.len()).collect();
        order.sort_by(|a, b| self.ids[*a].cmp(&self.ids[*b]));
        let mut out = serde_json::to_string(&Header {
            dim: self.dim,
            count: self.ids.len(),
        })
        .expect("header serializes");
        out.push('\n');
        for slot in order {
            let row = Row {
                id: self.ids[slot].clone(),
                vec: self.row(slot).to_vec(),
            };
            out.push_str(&serde_json::to_string(&row).expect("row serializes"));
            out.push('\n');
        }
        out
    }

    /// Embed each captioned photo's caption text with `embedder`.
    pub fn build_from_captions(corpus: &Corpus, embedder: &dyn Embedder) -> Result<Self, IndexError> {
        let mut rows = Vec::new();
        let mut dim = None;
        for photo in corpus.iter_chronological() {
            let vec = if let Some(caption) = &photo.caption {
                embedder.embed_text(caption)?
            } else if let Some(img) = &photo.image_ref {
                embedder.embed_images(std::slice::from_ref(img))?
            } else {
                log::warn!("photo {} has neither caption nor image", photo.photo_id);
                continue;
            };
            dim.get_or_insert(vec.len());
            rows.push((photo.photo_id.clone(), vec));
        }
        Self::from_rows(dim.unwrap_or(1), rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn contains(&self, id: &str) -> bool {
        self.slots.contains_key(id)
    }

    fn row(&self, slot: usize) -> &[f64] {
        &self.data[slot * self.dim..(slot + 1) * self.dim]
    }

    pub fn vector(&self, id: &str) -> Option<&[f64]> {
        self.slots.get(id).map(|s| self.row(*s))
    }

    /// Corpus photos without an embedding, in chronological order.
    pub fn coverage_gaps(&self, corpus: &Corpus) -> Vec<String> {
        corpus
            .chronological_index()
            .iter()
            .filter(|id| !self.contains(id))
            .cloned()
            .collect()
    }

    /// Renormalized mean of the unit vectors of every cue component.
    pub fn fuse_query(&self, cue: &QueryCue, embedder: Option<&dyn Embedder>) -> Result<Vec<f64>, IndexError> {
        if cue.is_empty() {
            return Err(IndexError::EmptyCue);
        }
        let mut parts: Vec<Vec<f64>> = Vec::new();
        if let Some(text) = cue.text.as_deref().filter(|t| !t.trim().is_empty()) {
            let embedder = embedder.ok_or(IndexError::EmbedderUnavailable)?;
            let raw = embedder.embed_text(text)?;
            if raw.len() != self.dim {
                return Err(IndexError::DimMismatch {
                    id: format!("text:{text}"),
                    expected: self.dim,
                    got: raw.len(),
                });
            }
            parts.push(normalize(raw).ok_or(IndexError::DegenerateMean)?);
        }
        for id in &cue.photo_ids {
            let v = self
                .vector(id)
                .ok_or_else(|| IndexError::UnknownReference(id.clone()))?;
            parts.push(v.to_vec());
        }
        let n = parts.len() as f64;
        let mut mean = vec![0.0; self.dim];
        for p in &parts {
            for (m, x) in mean.iter_mut().zip(p) {
                *m += x / n;
            }
        }
        normalize(mean).ok_or(IndexError::DegenerateMean)
    }

    /// Cosine top-k, descending score with ties broken by ascending id.
    pub fn search_topk(
        &self,
        query: &[f64],
        top_k: usize,
        scope: Option<&[String]>,
    ) -> Result<Vec<ScoredPhoto>, IndexError> {
        if top_k == 0 {
            return Err(IndexError::ZeroTopK);
        }
        if query.len() != self.dim {
            return Err(IndexError::DimMismatch {
                id: "query".into(),
                expected: self.dim,
                got: query.len(),
            });
        }
        let slots: Vec<usize> = match scope {
            None => (0..self.ids.len()).collect(),
            Some(ids) => {
                if ids.is_empty() {
                    return Err(IndexError::EmptyScope);
                }
                let mut seen = HashSet::new();
                let mut slots = Vec::with_capacity(ids.len());
                for id in ids {
                    let slot = *self
                        .slots
                        .get(id)
                        .ok_or_else(|| IndexError::UnknownScopePhoto(id.clone()))?;
                    if seen.insert(slot) {
                        slots.push(slot);
                    }
                }
                slots
            }
        };
        let mut scored: Vec<(f64, usize)> = slots
            .into_iter()
            .map(|s| (dot(query, self.row(s)).clamp(-1.0, 1.0), s))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(Ordering::Equal)
                .then_with(|| self.ids[a.1].cmp(&self.ids[b.1]))
        };
        if scored.len() > top_k {
            scored.select_nth_unstable_by(top_k - 1, cmp);
            scored.truncate(top_k);
        }
        scored.sort_by(cmp);
        Ok(scored
            .into_iter()
            .map(|(score, s)| ScoredPhoto {
                photo_id: self.ids[s].clone(),
                score,
            })
            .collect())
    }
}
