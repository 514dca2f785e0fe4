//! Scoring and benchmark orchestration.
//!
//! Set metrics (EM, F1, IoU) score agent answers; ranking metrics score the
//! direct-retrieval baseline; Best@k and majority vote aggregate repeated
//! runs. [`run_benchmark`] drives a session runner over a query file in a
//! bounded worker pool and assembles a deterministic report.

mod baseline;
mod bench;
mod metrics;
mod scaling;

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;

pub use baseline::{baseline_retrieve, RetrievalReport, RetrievalRow};
pub use bench::{
    aggregate, config_digest, run_benchmark, score_predictions, Aggregates, BenchmarkOptions, BenchmarkReport,
    GroupScore, KScore, QueryRow, RunMetadata, RunOutcome, RunRow, ScalingPoint, SessionRunner,
};
pub use metrics::{em, f1, iou, ranking_metrics, RankScores, DEFAULT_KS};
pub use scaling::{best_at_k, majority_vote, Prediction, VoteRule};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("ranking contains duplicate id {0}")]
    DuplicateInRanking(String),
    #[error("no runs to aggregate")]
    EmptyRuns,
    #[error("cannot resolve corpus for query {query_id}: {reason}")]
    Unresolvable { query_id: String, reason: String },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("query {query_id}: gold photo {photo_id} not in corpus")]
    UnknownGold { query_id: String, photo_id: String },
    #[error("repeats must be at least 1")]
    NoRepeats,
    #[error("interrupted before query {0} ran")]
    Interrupted(String),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryType {
    IntraEvent,
    InterEvent,
}

impl fmt::Display for QueryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryType::IntraEvent => "intra_event",
            QueryType::InterEvent => "inter_event",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub query_id: String,
    pub user_id: String,
    pub text: String,
    #[serde(rename = "type", alias = "query_type")]
    pub query_type: QueryType,
    pub gold: Vec<String>,
}

impl QueryRecord {
    pub fn check_gold(&self, corpus: &Corpus) -> Result<(), EvalError> {
        match self.gold.iter().find(|id| !corpus.contains(id)) {
            Some(id) => Err(EvalError::UnknownGold {
                query_id: self.query_id.clone(),
                photo_id: id.clone(),
            }),
            None => Ok(()),
        }
    }
}

fn jsonl_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// Parse a queries file. Gold sets must be non-empty and query ids unique.
pub fn parse_queries(text: &str) -> Result<Vec<QueryRecord>, EvalError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, raw) in jsonl_lines(text) {
        let q: QueryRecord = serde_json::from_str(raw).map_err(|e| EvalError::Malformed {
            line,
            message: e.to_string(),
        })?;
        let bad = |message: String| EvalError::Malformed { line, message };
        if q.gold.is_empty() {
            return Err(bad(format!("query {} has an empty gold set", q.query_id)));
        }
        if !seen.insert(q.query_id.clone()) {
            return Err(bad(format!("duplicate query id {}", q.query_id)));
        }
        out.push(q);
    }
    Ok(out)
}

pub fn load_queries(path: &Path) -> Result<Vec<QueryRecord>, EvalError> {
    parse_queries(&fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub query_id: String,
    pub predicted: Vec<String>,
}

pub fn parse_predictions(text: &str) -> Result<Vec<PredictionRecord>, EvalError> {
    jsonl_lines(text)
        .map(|(line, raw)| {
            serde_json::from_str(raw).map_err(|e| EvalError::Malformed {
                line,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord>, EvalError> {
    parse_predictions(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn queries_parse_and_validate() {
        let text = r#"{"query_id":"q1","user_id":"u","text":"t","type":"intra_event","gold":["a"]}

{"query_id":"q2","user_id":"u","text":"t","type":"inter_event","gold":["b","c"]}"#;
        let qs = parse_queries(text).unwrap();
        assert_eq!(qs[1].query_type, QueryType::InterEvent);

        let bad_type = r#"{"query_id":"q","user_id":"u","text":"t","type":"other","gold":["a"]}"#;
        assert!(matches!(
            parse_queries(bad_type),
            Err(EvalError::Malformed { line: 1, .. })
        ));
        let empty = r#"{"query_id":"q","user_id":"u","text":"t","type":"intra_event","gold":[]}"#;
        assert!(parse_queries(empty).is_err());
        let dup = format!("{}\n{}", text.lines().next().unwrap(), text.lines().next().unwrap());
        assert!(matches!(parse_queries(&dup), Err(EvalError::Malformed { line: 2, .. })));
    }
}
