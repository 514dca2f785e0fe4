use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{ranking_metrics, RankScores};
use super::{EvalError, QueryRecord};
use crate::vecindex::{Embedder, EmbeddingIndex, QueryCue};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalRow {
    pub query_id: String,
    pub ranking: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub scores: BTreeMap<usize, RankScores>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub ks: Vec<usize>,
    /// Means over non-failed queries, as fractions.
    pub mean: BTreeMap<usize, RankScores>,
    pub failed: usize,
    pub rows: Vec<RetrievalRow>,
}

/// Direct embedding retrieval: embed each query text and rank the whole
/// index by cosine similarity, scoring the top `max(ks)`.
pub fn baseline_retrieve(
    queries: &[QueryRecord],
    index: &EmbeddingIndex,
    embedder: &dyn Embedder,
    ks: &[usize],
) -> Result<RetrievalReport, EvalError> {
    let depth = ks.iter().copied().max().unwrap_or(0);
    let mut rows = Vec::with_capacity(queries.len());
    for q in queries {
        let cue = QueryCue {
            text: Some(q.text.clone()),
            photo_ids: Vec::new(),
        };
        let ranked = index
            .fuse_query(&cue, Some(embedder))
            .and_then(|v| index.search_topk(&v, depth.max(1), None));
        let row = match ranked {
            Ok(hits) => {
                let ranking: Vec<String> = hits.into_iter().take(depth).map(|h| h.photo_id).collect();
                let scores = ranking_metrics(&ranking, &q.gold, ks)?;
                RetrievalRow {
                    query_id: q.query_id.clone(),
                    ranking,
                    scores,
                    failed: None,
                }
            }
            Err(e) => RetrievalRow {
                query_id: q.query_id.clone(),
                ranking: Vec::new(),
                scores: BTreeMap::new(),
                failed: Some(e.to_string()),
            },
        };
        rows.push(row);
    }
    Ok(RetrievalReport::from_rows(ks, rows))
}

impl RetrievalReport {
    /// Recompute means from scored rows, e.g. after merging per-user runs.
    pub fn from_rows(ks: &[usize], rows: Vec<RetrievalRow>) -> Self {
        let ok: Vec<&RetrievalRow> = rows.iter().filter(|r| r.failed.is_none()).collect();
        let n = ok.len().max(1) as f64;
        let mean = ks
            .iter()
            .map(|&k| {
                let sum = |f: fn(&RankScores) -> f64| ok.iter().map(|r| f(&r.scores[&k])).sum::<f64>() / n;
                (
                    k,
                    RankScores {
                        map: sum(|s| s.map),
                        recall: sum(|s| s.recall),
                        ndcg: sum(|s| s.ndcg),
                    },
                )
            })
            .collect();
        let failed = rows.len() - ok.len();
        RetrievalReport {
            ks: ks.to_vec(),
            mean,
            failed,
            rows,
        }
    }

    /// One row of MAP@k, Recall@k and NDCG@k columns, in percent.
    pub fn render_table(&self, method: &str) -> String {
        let mut head = format!("{:<12}", "Method");
        let mut line = format!("{method:<12}");
        for (name, pick) in [
            ("MAP", (|s: &RankScores| s.map) as fn(&RankScores) -> f64),
            ("Recall", |s| s.recall),
            ("NDCG", |s| s.ndcg),
        ] {
            for k in &self.ks {
                let col = format!("{name}@{k}");
                let _ = write!(head, " | {col:>9}");
                let _ = write!(line, " | {:>9.1}", 100.0 * pick(&self.mean[k]));
            }
        }
        format!(
            "{head}\n{line}\nqueries: {} scored, {} failed\n",
            self.rows.len() - self.failed,
            self.failed
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalkit::QueryType;
    use crate::vecindex::HashEmbedder;

    #[test]
    fn caption_words_rank_gold_first() {
        let e = HashEmbedder::new(64);
        let rows = [("a", "red kite"), ("b", "blue boat"), ("c", "green tree")]
            .map(|(id, cap)| (id.to_string(), e.embed(cap)));
        let index = EmbeddingIndex::from_rows(64, rows).unwrap();
        let q = QueryRecord {
            query_id: "q".into(),
            user_id: "u".into(),
            text: "boat".into(),
            query_type: QueryType::IntraEvent,
            gold: vec!["b".into()],
        };
        let r = baseline_retrieve(&[q], &index, &e, &[1, 3]).unwrap();
        assert_eq!(r.rows[0].ranking[0], "b");
        assert_eq!(r.mean[&1].recall, 1.0);
        assert!(r.render_table("hash").contains("Recall@3"));
    }
}
