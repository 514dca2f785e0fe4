use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

use chrono::{Datelike, Timelike};

use super::alias::AliasTable;
use super::ast::{FilterExpr, Operand, TimeAttr};
use crate::corpus::{Corpus, Photo};
use crate::geocode::Geocoder;

/// Case-insensitive substring test after alias normalization, then against
/// any geocoder-resolved names.
pub fn match_address(address: &str, query: &str, aliases: &AliasTable, fallback: &[String]) -> bool {
    let haystack = address.to_lowercase();
    let normalized = aliases.normalize(query).to_lowercase();
    if !normalized.is_empty() && haystack.contains(&normalized) {
        return true;
    }
    fallback
        .iter()
        .map(|name| name.trim().to_lowercase())
        .any(|name| !name.is_empty() && haystack.contains(&name))
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Int(i64),
    Str(String),
}

/// Evaluation state shared by every photo in one filter run.
pub struct FilterContext<'a> {
    aliases: &'a AliasTable,
    geocoder: Option<&'a dyn Geocoder>,
    fallbacks: HashMap<String, Vec<String>>,
    warnings: AtomicUsize,
}

impl<'a> FilterContext<'a> {
    pub fn new(aliases: &'a AliasTable, geocoder: Option<&'a dyn Geocoder>) -> Self {
        Self {
            aliases,
            geocoder,
            fallbacks: HashMap::new(),
            warnings: AtomicUsize::new(0),
        }
    }

    /// Resolve geocoder fallbacks for address queries that match no stored
    /// address anywhere in `corpus`.
    pub fn prepare(&mut self, expr: &FilterExpr, corpus: &Corpus) {
        let Some(geocoder) = self.geocoder else {
            return;
        };
        let queries: HashSet<&str> = expr.address_queries().into_iter().collect();
        let mut queries: Vec<&str> = queries.into_iter().collect();
        queries.sort_unstable();
        for query in queries {
            if self.fallbacks.contains_key(query) {
                continue;
            }
            let hit = corpus.iter_chronological().any(|p| {
                p.address
                    .as_deref()
                    .is_some_and(|a| match_address(a, query, self.aliases, &[]))
            });
            if hit {
                continue;
            }
            let names = match geocoder.forward(&self.aliases.normalize(query)) {
                Ok(names) => names,
                Err(e) => {
                    log::warn!("geocoder fallback for {query:?} failed: {e}");
                    self.warnings.fetch_add(1, AtomicOrdering::Relaxed);
                    Vec::new()
                }
            };
            self.fallbacks.insert(query.to_string(), names);
        }
    }

    /// Number of evaluations that hit a missing field or failed lookup.
    pub fn warnings(&self) -> usize {
        self.warnings.load(AtomicOrdering::Relaxed)
    }

    fn warn(&self) {
        self.warnings.fetch_add(1, AtomicOrdering::Relaxed);
    }

    fn value(&self, operand: &Operand, photo: &Photo) -> Value {
        let ts = &photo.timestamp;
        match operand {
            Operand::Int(v) => Value::Int(*v),
            Operand::Str(s) => Value::Str(s.clone()),
            Operand::Time(attr) => match attr {
                TimeAttr::Year => Value::Int(ts.year() as i64),
                TimeAttr::Month => Value::Int(ts.month() as i64),
                TimeAttr::Day => Value::Int(ts.day() as i64),
                TimeAttr::Hour => Value::Int(ts.hour() as i64),
                TimeAttr::Minute => Value::Int(ts.minute() as i64),
                TimeAttr::Weekday => Value::Int(ts.weekday().num_days_from_monday() as i64),
                TimeAttr::Date => Value::Str(ts.format("%Y-%m-%d").to_string()),
                TimeAttr::Iso => Value::Str(photo.time_iso()),
            },
        }
    }

    pub fn evaluate(&self, expr: &FilterExpr, photo: &Photo) -> bool {
        match expr {
            FilterExpr::Or(a, b) => self.evaluate(a, photo) || self.evaluate(b, photo),
            FilterExpr::And(a, b) => self.evaluate(a, photo) && self.evaluate(b, photo),
            FilterExpr::Not(e) => !self.evaluate(e, photo),
            FilterExpr::Compare { op, lhs, rhs } => {
                let ord = match (self.value(lhs, photo), self.value(rhs, photo)) {
                    (Value::Int(a), Value::Int(b)) => a.cmp(&b),
                    (Value::Str(a), Value::Str(b)) => a.cmp(&b),
                    // kinds are checked at parse time; a hand-built tree may still mix them
                    _ => {
                        self.warn();
                        return false;
                    }
                };
                op.holds(ord)
            }
            FilterExpr::MatchAddress(query) => match photo.resolved_address(self.geocoder) {
                Some(addr) => {
                    let fallback = self.fallbacks.get(query).map(Vec::as_slice).unwrap_or(&[]);
                    match_address(&addr, query, self.aliases, fallback)
                }
                None => {
                    self.warn();
                    false
                }
            },
        }
    }
}

/// Ids of matching photos in chronological order, optionally restricted to `scope`.
pub fn filter_scope(
    corpus: &Corpus,
    expr: &FilterExpr,
    scope: Option<&[String]>,
    ctx: &FilterContext<'_>,
) -> Vec<String> {
    let scope: Option<HashSet<&str>> = scope.map(|s| s.iter().map(String::as_str).collect());
    corpus
        .iter_chronological()
        .filter(|p| scope.as_ref().is_none_or(|s| s.contains(p.photo_id.as_str())))
        .filter(|p| ctx.evaluate(expr, p))
        .map(|p| p.photo_id.clone())
        .collect()
}
