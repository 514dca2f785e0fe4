use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::{em, f1};
use super::scaling::{best_at_k, majority_vote, VoteRule};
use super::{EvalError, PredictionRecord, QueryRecord, QueryType};
use crate::agent::{SessionResult, SessionStatus};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub predicted: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<SessionStatus>,
    pub turns: usize,
}

impl From<&SessionResult> for RunOutcome {
    fn from(r: &SessionResult) -> Self {
        Self {
            predicted: r.predicted.clone(),
            status: Some(r.status),
            turns: r.turns,
        }
    }
}

/// Executes one fresh session for `query`. `repeat` is the 0-based run
/// index, so seeded runners can derive independent streams per repeat.
pub trait SessionRunner: Sync {
    fn run(&self, query: &QueryRecord, repeat: usize) -> Result<RunOutcome, EvalError>;
}

impl<F> SessionRunner for F
where
    F: Fn(&QueryRecord, usize) -> Result<RunOutcome, EvalError> + Sync,
{
    fn run(&self, query: &QueryRecord, repeat: usize) -> Result<RunOutcome, EvalError> {
        self(query, repeat)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub model: String,
    pub embedder: String,
    pub config_digest: String,
    pub seed: u64,
}

/// Short hex digest of a serialized run configuration.
pub fn config_digest(config: &impl Serialize) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    hex::encode(&Sha256::digest(bytes)[..8])
}

#[derive(Debug, Clone)]
pub struct BenchmarkOptions {
    pub parallel: usize,
    pub repeats: usize,
    pub vote: VoteRule,
    pub metadata: RunMetadata,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        Self {
            parallel: 1,
            repeats: 1,
            vote: VoteRule::default(),
            metadata: RunMetadata::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KScore {
    pub k: usize,
    pub em: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub predicted: Vec<String>,
    pub em: f64,
    pub f1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<SessionStatus>,
    pub turns: usize,
}

/// Per-query scores. The headline fields describe the first run; the
/// scaling series cover prefixes of the repeated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRow {
    pub query_id: String,
    pub user_id: String,
    pub query_type: QueryType,
    pub gold: Vec<String>,
    pub predicted: Vec<String>,
    pub em: f64,
    pub f1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<SessionStatus>,
    pub turns: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub runs: Vec<RunRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub best_at_k: Vec<KScore>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub majority_at_k: Vec<KScore>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupScore {
    pub n: usize,
    /// Percent.
    pub em: f64,
    /// Percent.
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub overall: GroupScore,
    pub intra_event: GroupScore,
    pub inter_event: GroupScore,
}

/// Mean scores (percent) over queries for one prefix length `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub k: usize,
    pub best_em: f64,
    pub best_f1: f64,
    pub majority_em: f64,
    pub majority_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub metadata: RunMetadata,
    pub repeats: usize,
    pub vote: VoteRule,
    pub failed: usize,
    pub aggregates: Aggregates,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scaling: Vec<ScalingPoint>,
    pub rows: Vec<QueryRow>,
}

fn group(rows: &[&QueryRow]) -> GroupScore {
    if rows.is_empty() {
        return GroupScore::default();
    }
    let n = rows.len() as f64;
    GroupScore {
        n: rows.len(),
        em: 100.0 * rows.iter().map(|r| r.em).sum::<f64>() / n,
        f1: 100.0 * rows.iter().map(|r| r.f1).sum::<f64>() / n,
    }
}

/// Macro means over non-failed rows, overall and per query type.
pub fn aggregate(rows: &[QueryRow]) -> Aggregates {
    let ok: Vec<&QueryRow> = rows.iter().filter(|r| r.failed.is_none()).collect();
    let of = |t: QueryType| -> Vec<&QueryRow> { ok.iter().copied().filter(|r| r.query_type == t).collect() };
    Aggregates {
        overall: group(&ok),
        intra_event: group(&of(QueryType::IntraEvent)),
        inter_event: group(&of(QueryType::InterEvent)),
    }
}

fn scaling_series(rows: &[QueryRow], repeats: usize) -> Vec<ScalingPoint> {
    let ok: Vec<&QueryRow> = rows.iter().filter(|r| r.failed.is_none()).collect();
    if repeats < 2 || ok.is_empty() {
        return Vec::new();
    }
    let n = ok.len() as f64;
    let mean = |f: &dyn Fn(&QueryRow) -> f64| 100.0 * ok.iter().map(|r| f(r)).sum::<f64>() / n;
    (0..repeats)
        .map(|i| ScalingPoint {
            k: i + 1,
            best_em: mean(&|r| r.best_at_k[i].em),
            best_f1: mean(&|r| r.best_at_k[i].f1),
            majority_em: mean(&|r| r.majority_at_k[i].em),
            majority_f1: mean(&|r| r.majority_at_k[i].f1),
        })
        .collect()
}

fn build_row(q: &QueryRecord, outcomes: Vec<Result<RunOutcome, EvalError>>, vote: VoteRule) -> QueryRow {
    let mut row = QueryRow {
        query_id: q.query_id.clone(),
        user_id: q.user_id.clone(),
        query_type: q.query_type,
        gold: q.gold.clone(),
        predicted: Vec::new(),
        em: 0.0,
        f1: 0.0,
        status: None,
        turns: 0,
        failed: None,
        runs: Vec::new(),
        best_at_k: Vec::new(),
        majority_at_k: Vec::new(),
    };
    let mut runs = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        match o {
            Ok(o) => runs.push(o),
            Err(e) => {
                row.failed = Some(e.to_string());
                return row;
            }
        }
    }
    let first = &runs[0];
    row.predicted = first.predicted.clone();
    row.em = em(&first.predicted, &q.gold);
    row.f1 = f1(&first.predicted, &q.gold);
    row.status = first.status;
    row.turns = first.turns;
    if runs.len() > 1 {
        let preds: Vec<Vec<String>> = runs.iter().map(|r| r.predicted.clone()).collect();
        for k in 1..=preds.len() {
            let best = best_at_k(&preds[..k], &q.gold).expect("prefix is non-empty");
            row.best_at_k.push(KScore {
                k,
                em: em(best, &q.gold),
                f1: f1(best, &q.gold),
            });
            let voted = majority_vote(&preds[..k], vote).expect("prefix is non-empty");
            row.majority_at_k.push(KScore {
                k,
                em: em(&voted, &q.gold),
                f1: f1(&voted, &q.gold),
            });
        }
        row.runs = runs
            .into_iter()
            .map(|r| RunRow {
                em: em(&r.predicted, &q.gold),
                f1: f1(&r.predicted, &q.gold),
                predicted: r.predicted,
                status: r.status,
                turns: r.turns,
            })
            .collect();
    }
    row
}

/// Run `repeats` fresh sessions per query on a pool of `parallel` workers.
///
/// Rows are sorted by query id, so the report does not depend on
/// scheduling. A query whose runner fails is marked failed and left out of
/// every mean.
pub fn run_benchmark(
    queries: &[QueryRecord],
    runner: &dyn SessionRunner,
    options: &BenchmarkOptions,
) -> Result<BenchmarkReport, EvalError> {
    if options.repeats == 0 {
        return Err(EvalError::NoRepeats);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.parallel.max(1))
        .build()
        .map_err(|e| EvalError::Pool(e.to_string()))?;
    let jobs: Vec<(usize, usize)> = (0..queries.len())
        .flat_map(|q| (0..options.repeats).map(move |r| (q, r)))
        .collect();
    let results: Vec<Result<RunOutcome, EvalError>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(q, r)| {
                log::debug!("query {} run {}", queries[q].query_id, r);
                runner.run(&queries[q], r)
            })
            .collect()
    });
    let mut results = results.into_iter();
    let mut rows: Vec<QueryRow> = queries
        .iter()
        .map(|q| {
            let outcomes = results.by_ref().take(options.repeats).collect();
            build_row(q, outcomes, options.vote)
        })
        .collect();
    rows.sort_by(|a, b| a.query_id.cmp(&b.query_id));
    let failed = rows.iter().filter(|r| r.failed.is_some()).count();
    Ok(BenchmarkReport {
        metadata: options.metadata.clone(),
        repeats: options.repeats,
        vote: options.vote,
        failed,
        aggregates: aggregate(&rows),
        scaling: scaling_series(&rows, options.repeats),
        rows,
    })
}

/// Score an existing predictions file. Queries without a prediction are
/// scored as empty answers.
pub fn score_predictions(
    queries: &[QueryRecord],
    predictions: &[PredictionRecord],
    metadata: RunMetadata,
) -> Result<BenchmarkReport, EvalError> {
    let by_id: HashMap<&str, &PredictionRecord> = predictions.iter().map(|p| (p.query_id.as_str(), p)).collect();
    let runner = |q: &QueryRecord, _: usize| -> Result<RunOutcome, EvalError> {
        Ok(RunOutcome {
            predicted: by_id
                .get(q.query_id.as_str())
                .map(|p| p.predicted.clone())
                .unwrap_or_default(),
            status: None,
            turns: 0,
        })
    };
    run_benchmark(
        queries,
        &runner,
        &BenchmarkOptions {
            metadata,
            ..Default::default()
        },
    )
}

impl BenchmarkReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text table in the EM/F1 by Intra/Inter/Overall layout.
    pub fn render_table(&self) -> String {
        let a = &self.aggregates;
        let method = if self.metadata.model.is_empty() {
            "agent"
        } else {
            self.metadata.model.as_str()
        };
        let width = method.len().max(6);
        let mut out = String::from("Scores are macro means over queries, in percent.\n");
        let _ = writeln!(
            out,
            "{:<width$} | Intra EM | Intra F1 | Inter EM | Inter F1 | Overall EM | Overall F1",
            "Method"
        );
        // groups without scored queries show "-" rather than a misleading 0.0
        let cell = |g: &GroupScore, v: f64, w: usize| {
            if g.n == 0 {
                format!("{:>w$}", "-")
            } else {
                format!("{v:>w$.1}")
            }
        };
        let _ = writeln!(
            out,
            "{:<width$} | {} | {} | {} | {} | {} | {}",
            method,
            cell(&a.intra_event, a.intra_event.em, 8),
            cell(&a.intra_event, a.intra_event.f1, 8),
            cell(&a.inter_event, a.inter_event.em, 8),
            cell(&a.inter_event, a.inter_event.f1, 8),
            cell(&a.overall, a.overall.em, 10),
            cell(&a.overall, a.overall.f1, 10)
        );
        let _ = writeln!(
            out,
            "queries: {} scored ({} intra, {} inter), {} failed",
            a.overall.n, a.intra_event.n, a.inter_event.n, self.failed
        );
        if !self.scaling.is_empty() {
            let _ = writeln!(out, "\n  k | Best@k EM | Best@k F1 | Majority EM | Majority F1");
            for p in &self.scaling {
                let _ = writeln!(
                    out,
                    "{:>3} | {:>9.1} | {:>9.1} | {:>11.1} | {:>11.1}",
                    p.k, p.best_em, p.best_f1, p.majority_em, p.majority_f1
                );
            }
        }
        out
    }

    /// Per-k data series for plotting Best@k and majority-vote curves.
    pub fn plot_series(&self) -> serde_json::Value {
        let col = |f: fn(&ScalingPoint) -> f64| self.scaling.iter().map(f).collect::<Vec<_>>();
        serde_json::json!({
            "k": self.scaling.iter().map(|p| p.k).collect::<Vec<_>>(),
            "best_em": col(|p| p.best_em),
            "best_f1": col(|p| p.best_f1),
            "majority_em": col(|p| p.majority_em),
            "majority_f1": col(|p| p.majority_f1),
        })
    }

    /// Write `report.json` and `report.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), EvalError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), self.to_json())?;
        fs::write(dir.join("report.txt"), self.render_table())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(id: &str, t: QueryType, gold: &[&str]) -> QueryRecord {
        QueryRecord {
            query_id: id.into(),
            user_id: "u".into(),
            text: String::new(),
            query_type: t,
            gold: gold.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn answer(ids: &[String]) -> Result<RunOutcome, EvalError> {
        Ok(RunOutcome {
            predicted: ids.to_vec(),
            status: Some(SessionStatus::Answered),
            turns: 1,
        })
    }

    #[test]
    fn perfect_and_empty_runners() {
        let qs = vec![
            q("q1", QueryType::IntraEvent, &["a"]),
            q("q2", QueryType::InterEvent, &["b", "c"]),
            q("q3", QueryType::IntraEvent, &["d"]),
        ];
        let perfect = |q: &QueryRecord, _: usize| answer(&q.gold);
        let r = run_benchmark(&qs, &perfect, &BenchmarkOptions::default()).unwrap();
        assert_eq!((r.aggregates.overall.em, r.aggregates.overall.f1), (100.0, 100.0));
        let empty = |_: &QueryRecord, _: usize| answer(&[]);
        let r = run_benchmark(&qs, &empty, &BenchmarkOptions::default()).unwrap();
        assert_eq!((r.aggregates.overall.em, r.aggregates.overall.f1), (0.0, 0.0));
    }

    #[test]
    fn mixed_types_and_failures() {
        let qs = vec![
            q("q1", QueryType::IntraEvent, &["a"]),
            q("q2", QueryType::IntraEvent, &["b"]),
            q("q3", QueryType::InterEvent, &["c"]),
            q("q4", QueryType::InterEvent, &["z"]),
        ];
        let runner = |q: &QueryRecord, _: usize| match q.query_id.as_str() {
            "q2" => answer(&["x".to_string()]),
            "q4" => Err(EvalError::Unresolvable {
                query_id: q.query_id.clone(),
                reason: "no corpus".into(),
            }),
            _ => answer(&q.gold),
        };
        let r = run_benchmark(&qs, &runner, &BenchmarkOptions::default()).unwrap();
        assert_eq!(r.failed, 1);
        assert_eq!(r.aggregates.intra_event.f1, 50.0);
        assert_eq!(r.aggregates.inter_event.f1, 100.0);
        assert!((r.aggregates.overall.f1 - 200.0 / 3.0).abs() < 1e-9);
        assert!(r.render_table().contains("66.7"));
    }

    #[test]
    fn repeats_fill_scaling_series() {
        let qs = vec![q("q1", QueryType::IntraEvent, &["a", "b"])];
        let runner = |_: &QueryRecord, r: usize| match r {
            0 => answer(&["a".to_string()]),
            _ => answer(&["a".to_string(), "b".to_string()]),
        };
        let opts = BenchmarkOptions {
            repeats: 3,
            ..Default::default()
        };
        let r = run_benchmark(&qs, &runner, &opts).unwrap();
        let f1s: Vec<f64> = r.scaling.iter().map(|p| p.best_f1).collect();
        assert!((f1s[0] - 200.0 / 3.0).abs() < 1e-9);
        assert_eq!(&f1s[1..], &[100.0, 100.0]);
        // k=2: only "a" has a strict majority
        assert!((r.scaling[1].majority_f1 - 200.0 / 3.0).abs() < 1e-9);
        assert_eq!(r.scaling[2].majority_f1, 100.0);
        assert_eq!(r.plot_series()["k"], serde_json::json!([1, 2, 3]));
    }
}
