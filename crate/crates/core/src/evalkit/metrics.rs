use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::EvalError;

pub const DEFAULT_KS: [usize; 4] = [1, 3, 5, 10];

fn set(ids: &[String]) -> HashSet<&str> {
    ids.iter().map(String::as_str).collect()
}

/// 1.0 when the two id sets are equal (including both empty), else 0.0.
pub fn em(pred: &[String], gold: &[String]) -> f64 {
    if set(pred) == set(gold) {
        1.0
    } else {
        0.0
    }
}

/// Set F1. Both empty scores 1; an empty side against a non-empty one scores 0.
pub fn f1(pred: &[String], gold: &[String]) -> f64 {
    let (p, g) = (set(pred), set(gold));
    if p.is_empty() && g.is_empty() {
        return 1.0;
    }
    if p.is_empty() || g.is_empty() {
        return 0.0;
    }
    let hit = p.intersection(&g).count() as f64;
    let precision = hit / p.len() as f64;
    let recall = hit / g.len() as f64;
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Intersection over union; both empty scores 1.
pub fn iou(a: &[String], b: &[String]) -> f64 {
    let (a, b) = (set(a), set(b));
    let union = a.union(&b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankScores {
    pub map: f64,
    pub recall: f64,
    pub ndcg: f64,
}

/// Binary-relevance MAP@k, Recall@k and NDCG@k for each `k`.
///
/// MAP@k divides by `min(k, |gold|)`; NDCG uses the `1/log2(i+1)` discount.
/// An empty gold set scores zero everywhere.
pub fn ranking_metrics(
    ranking: &[String],
    gold: &[String],
    ks: &[usize],
) -> Result<BTreeMap<usize, RankScores>, EvalError> {
    let mut seen = HashSet::new();
    for id in ranking {
        if !seen.insert(id.as_str()) {
            return Err(EvalError::DuplicateInRanking(id.clone()));
        }
    }
    let gold = set(gold);
    let mut out = BTreeMap::new();
    for &k in ks {
        if gold.is_empty() || k == 0 {
            out.insert(
                k,
                RankScores {
                    map: 0.0,
                    recall: 0.0,
                    ndcg: 0.0,
                },
            );
            continue;
        }
        let depth = k.min(ranking.len());
        let mut hits = 0usize;
        let mut precision_sum = 0.0;
        let mut dcg = 0.0;
        for (i, id) in ranking[..depth].iter().enumerate() {
            if gold.contains(id.as_str()) {
                hits += 1;
                precision_sum += hits as f64 / (i + 1) as f64;
                dcg += 1.0 / ((i + 2) as f64).log2();
            }
        }
        let ideal = k.min(gold.len());
        let idcg: f64 = (0..ideal).map(|i| 1.0 / ((i + 2) as f64).log2()).sum();
        out.insert(
            k,
            RankScores {
                map: precision_sum / ideal as f64,
                recall: hits as f64 / gold.len() as f64,
                ndcg: dcg / idcg,
            },
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(ids: &[&str]) -> Vec<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn worked_values() {
        assert!((f1(&v(&["a", "b", "c"]), &v(&["b", "c", "d"])) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(iou(&v(&["a", "b", "c"]), &v(&["b", "c", "d"])), 0.5);
        assert_eq!(em(&v(&["a", "b"]), &v(&["b", "a"])), 1.0);
        assert_eq!(em(&v(&["a"]), &v(&["a", "b"])), 0.0);
        assert_eq!(em(&[], &[]), 1.0);
        assert_eq!(f1(&[], &v(&["a"])), 0.0);
        assert_eq!(f1(&v(&["x"]), &v(&["a"])), 0.0);

        let r = ranking_metrics(&v(&["x", "a", "y"]), &v(&["a"]), &[3]).unwrap();
        assert!((r[&3].ndcg - 1.0 / 3f64.log2()).abs() < 1e-12);
        let r = ranking_metrics(&v(&["a", "x", "b"]), &v(&["a", "b"]), &[3]).unwrap();
        assert!((r[&3].map - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn duplicates_rejected() {
        assert!(matches!(
            ranking_metrics(&v(&["a", "a"]), &v(&["a"]), &DEFAULT_KS),
            Err(EvalError::DuplicateInRanking(_))
        ));
    }

    #[test]
    fn short_ranking_keeps_normalizers() {
        let r = ranking_metrics(&v(&["a"]), &v(&["a", "b"]), &[10]).unwrap();
        assert_eq!(r[&10].recall, 0.5);
        assert_eq!(r[&10].map, 0.5);
    }
}
