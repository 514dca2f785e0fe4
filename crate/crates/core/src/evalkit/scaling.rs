use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::metrics::f1;
use super::EvalError;
use crate::agent::SessionResult;

/// Anything carrying a predicted id list.
pub trait Prediction {
    fn predicted(&self) -> &[String];
}

impl Prediction for Vec<String> {
    fn predicted(&self) -> &[String] {
        self
    }
}

impl Prediction for SessionResult {
    fn predicted(&self) -> &[String] {
        &self.predicted
    }
}

/// The run with the highest F1 against `gold`; ties go to the earliest run.
pub fn best_at_k<'r, P: Prediction>(runs: &'r [P], gold: &[String]) -> Result<&'r P, EvalError> {
    let mut best: Option<(&P, f64)> = None;
    for run in runs {
        let score = f1(run.predicted(), gold);
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((run, score));
        }
    }
    best.map(|(r, _)| r).ok_or(EvalError::EmptyRuns)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteRule {
    /// Keep each photo predicted by strictly more than half of the runs.
    #[default]
    PerPhoto,
    /// Keep the most frequent whole predicted set; ties go to the set seen first.
    SetPlurality,
}

/// Aggregated prediction of several runs, sorted by id.
pub fn majority_vote<P: Prediction>(runs: &[P], rule: VoteRule) -> Result<Vec<String>, EvalError> {
    if runs.is_empty() {
        return Err(EvalError::EmptyRuns);
    }
    match rule {
        VoteRule::PerPhoto => {
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for run in runs {
                let unique: BTreeSet<&str> = run.predicted().iter().map(String::as_str).collect();
                for id in unique {
                    *counts.entry(id).or_default() += 1;
                }
            }
            Ok(counts
                .into_iter()
                .filter(|&(_, c)| 2 * c > runs.len())
                .map(|(id, _)| id.to_string())
                .collect())
        }
        VoteRule::SetPlurality => {
            let sets: Vec<Vec<String>> = runs
                .iter()
                .map(|r| {
                    let s: BTreeSet<&String> = r.predicted().iter().collect();
                    s.into_iter().cloned().collect()
                })
                .collect();
            let mut best: Option<(&Vec<String>, usize)> = None;
            for s in &sets {
                let n = sets.iter().filter(|o| *o == s).count();
                if best.is_none_or(|(_, b)| n > b) {
                    best = Some((s, n));
                }
            }
            Ok(best.map(|(s, _)| s.clone()).unwrap_or_default())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(ids: &[&str]) -> Vec<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn best_picks_max_and_earliest_tie() {
        let gold = v(&["a", "b"]);
        let runs = vec![v(&["a", "x", "y", "z"]), v(&["a", "b"]), v(&["a"])];
        assert_eq!(best_at_k(&runs, &gold).unwrap(), &runs[1]);
        let same = vec![v(&["a"]), v(&["b"])];
        assert!(std::ptr::eq(best_at_k(&same, &gold).unwrap(), &same[0]));
        assert!(best_at_k::<Vec<String>>(&[], &gold).is_err());
    }

    #[test]
    fn majority_cases() {
        let runs = vec![v(&["a", "b"]), v(&["a"]), v(&["a", "c"])];
        assert_eq!(majority_vote(&runs, VoteRule::PerPhoto).unwrap(), v(&["a"]));
        assert!(majority_vote(&[v(&["a"]), v(&["b"])], VoteRule::PerPhoto)
            .unwrap()
            .is_empty());
        let plural = vec![v(&["b", "a"]), v(&["c"]), v(&["a", "b"])];
        assert_eq!(majority_vote(&plural, VoteRule::SetPlurality).unwrap(), v(&["a", "b"]));
    }
}
