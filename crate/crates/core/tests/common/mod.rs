//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use chrono::{Datelike, Timelike};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use seeker::corpus::Photo;

// ---------------------------------------------------------------- metrics

fn dedup(ids: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for id in ids {
        if !out.contains(id) {
            out.push(id.clone());
        }
    }
    out
}

fn overlap(a: &[String], b: &[String]) -> usize {
    dedup(a).iter().filter(|x| b.contains(x)).count()
}

pub fn brute_em(pred: &[String], gold: &[String]) -> f64 {
    let (p, g) = (dedup(pred), dedup(gold));
    let same = p.len() == g.len() && p.iter().all(|x| g.contains(x));
    if same {
        1.0
    } else {
        0.0
    }
}

pub fn brute_f1(pred: &[String], gold: &[String]) -> f64 {
    let (p, g) = (dedup(pred), dedup(gold));
    match (p.is_empty(), g.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let tp = overlap(&p, &g) as f64;
    if tp == 0.0 {
        return 0.0;
    }
    // 2pr/(p+r) with p = tp/|P|, r = tp/|G| simplifies to 2tp/(|P|+|G|)
    2.0 * tp / (p.len() + g.len()) as f64
}

pub fn brute_iou(a: &[String], b: &[String]) -> f64 {
    let (a, b) = (dedup(a), dedup(b));
    let inter = overlap(&a, &b);
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// (map, recall, ndcg) at `k`, by direct enumeration of ranks.
pub fn brute_rank(ranking: &[String], gold: &[String], k: usize) -> (f64, f64, f64) {
    let gold = dedup(gold);
    if gold.is_empty() || k == 0 {
        return (0.0, 0.0, 0.0);
    }
    let cut = &ranking[..k.min(ranking.len())];
    let rel = |i: usize| gold.contains(&cut[i - 1]);
    let mut ap = 0.0;
    let mut dcg = 0.0;
    for i in 1..=cut.len() {
        if rel(i) {
            let hits_to_i = (1..=i).filter(|&j| rel(j)).count();
            ap += hits_to_i as f64 / i as f64;
            dcg += std::f64::consts::LN_2 / ((i + 1) as f64).ln();
        }
    }
    let norm = k.min(gold.len());
    let idcg: f64 = (1..=norm).map(|i| std::f64::consts::LN_2 / ((i + 1) as f64).ln()).sum();
    let recall = (1..=cut.len()).filter(|&i| rel(i)).count() as f64 / gold.len() as f64;
    (ap / norm as f64, recall, dcg / idcg)
}

pub fn random_subset(rng: &mut ChaCha8Rng, universe: &[String], max: usize) -> Vec<String> {
    let n = rng.gen_range(0..=max.min(universe.len()));
    universe.choose_multiple(rng, n).cloned().collect()
}

// ------------------------------------------------------------- filter DSL

#[derive(Debug, Clone)]
pub enum Side {
    Int(i64),
    Str(String),
    Attr(&'static str),
}

#[derive(Debug, Clone)]
pub enum Gen {
    Or(Box<Gen>, Box<Gen>),
    And(Box<Gen>, Box<Gen>),
    Not(Box<Gen>),
    Cmp(Side, &'static str, Side),
    Addr(String),
}

const INT_ATTRS: [&str; 6] = ["year", "month", "day", "hour", "minute", "weekday"];
const OPS: [&str; 6] = ["==", "!=", "<", "<=", ">", ">="];
const PLACES: [&str; 9] = [
    "Oxford",
    "paris",
    "FRANCE",
    "uk",
    "US",
    "Tokyo",
    "beach",
    "New South Wales",
    "Narnia",
];

fn int_literal(rng: &mut ChaCha8Rng, attr: &str) -> i64 {
    match attr {
        "year" => rng.gen_range(2009..=2015),
        "month" => rng.gen_range(1..=12),
        "day" => rng.gen_range(1..=31),
        "hour" => rng.gen_range(0..=23),
        "minute" => rng.gen_range(0..=59),
        _ => rng.gen_range(0..=6),
    }
}

fn gen_cmp(rng: &mut ChaCha8Rng) -> Gen {
    let op = OPS[rng.gen_range(0..OPS.len())];
    match rng.gen_range(0..4) {
        0 | 1 => {
            let attr = INT_ATTRS[rng.gen_range(0..INT_ATTRS.len())];
            let lit = Side::Int(int_literal(rng, attr));
            if rng.gen_bool(0.2) {
                Gen::Cmp(lit, op, Side::Attr(attr))
            } else {
                Gen::Cmp(Side::Attr(attr), op, lit)
            }
        }
        2 => {
            let date = format!(
                "{}-{:02}-{:02}",
                rng.gen_range(2010..=2014),
                rng.gen_range(1..=12),
                rng.gen_range(1..=28)
            );
            let attr = if rng.gen_bool(0.7) { "date" } else { "iso" };
            Gen::Cmp(Side::Attr(attr), op, Side::Str(date))
        }
        _ => {
            let a = INT_ATTRS[rng.gen_range(0..INT_ATTRS.len())];
            let b = INT_ATTRS[rng.gen_range(0..INT_ATTRS.len())];
            Gen::Cmp(Side::Attr(a), op, Side::Attr(b))
        }
    }
}

pub fn gen_expr(rng: &mut ChaCha8Rng, depth: usize) -> Gen {
    let leaf = depth == 0 || rng.gen_bool(0.3);
    if leaf {
        return if rng.gen_bool(0.25) {
            Gen::Addr(PLACES[rng.gen_range(0..PLACES.len())].to_string())
        } else {
            gen_cmp(rng)
        };
    }
    match rng.gen_range(0..5) {
        0 | 1 => Gen::And(Box::new(gen_expr(rng, depth - 1)), Box::new(gen_expr(rng, depth - 1))),
        2 | 3 => Gen::Or(Box::new(gen_expr(rng, depth - 1)), Box::new(gen_expr(rng, depth - 1))),
        _ => Gen::Not(Box::new(gen_expr(rng, depth - 1))),
    }
}

fn side_text(s: &Side) -> String {
    match s {
        Side::Int(v) => v.to_string(),
        Side::Str(s) => format!("\"{s}\""),
        Side::Attr(a) => format!("time.{a}"),
    }
}

fn ws(rng: &mut ChaCha8Rng) -> &'static str {
    [" ", "  ", "\t", " \n "][rng.gen_range(0..4)]
}

/// Render with randomized whitespace, dropping parentheses only where
/// precedence (`not` > `and` > `or`) makes them redundant.
pub fn render(g: &Gen, rng: &mut ChaCha8Rng) -> String {
    fn prec(g: &Gen) -> u8 {
        match g {
            Gen::Or(..) => 0,
            Gen::And(..) => 1,
            Gen::Not(..) => 2,
            Gen::Cmp(..) | Gen::Addr(_) => 3,
        }
    }
    fn child(g: &Gen, min: u8, rng: &mut ChaCha8Rng) -> String {
        let inner = render(g, rng);
        if prec(g) < min || rng.gen_bool(0.2) {
            format!("({inner})")
        } else {
            inner
        }
    }
    match g {
        Gen::Or(a, b) => {
            let (l, r) = (child(a, 0, rng), child(b, 1, rng));
            format!("{l}{}or{}{r}", ws(rng), ws(rng))
        }
        Gen::And(a, b) => {
            let (l, r) = (child(a, 1, rng), child(b, 2, rng));
            format!("{l}{}and{}{r}", ws(rng), ws(rng))
        }
        Gen::Not(e) => {
            let inner = child(e, 2, rng);
            format!("not{}{inner}", ws(rng))
        }
        Gen::Cmp(l, op, r) => format!("{}{}{op}{}{}", side_text(l), ws(rng), ws(rng), side_text(r)),
        Gen::Addr(q) => format!("match_address(address,{}\"{q}\")", ws(rng)),
    }
}

fn side_value(s: &Side, p: &Photo) -> Result<i64, String> {
    let t = &p.timestamp;
    Ok(match s {
        Side::Int(v) => *v,
        Side::Str(s) => return Err(s.clone()),
        Side::Attr("year") => t.year() as i64,
        Side::Attr("month") => t.month() as i64,
        Side::Attr("day") => t.day() as i64,
        Side::Attr("hour") => t.hour() as i64,
        Side::Attr("minute") => t.minute() as i64,
        Side::Attr("weekday") => t.weekday().num_days_from_monday() as i64,
        Side::Attr("date") => return Err(t.format("%Y-%m-%d").to_string()),
        Side::Attr(_) => return Err(t.format("%Y-%m-%dT%H:%M:%SZ").to_string()),
    })
}

fn holds<T: PartialOrd>(a: T, op: &str, b: T) -> bool {
    match op {
        "==" => a == b,
        "!=" => a != b,
        "<" => a < b,
        "<=" => a <= b,
        ">" => a > b,
        _ => a >= b,
    }
}

/// Tree-walking reference evaluator.
pub fn oracle(g: &Gen, p: &Photo) -> bool {
    match g {
        Gen::Or(a, b) => oracle(a, p) || oracle(b, p),
        Gen::And(a, b) => oracle(a, p) && oracle(b, p),
        Gen::Not(e) => !oracle(e, p),
        Gen::Cmp(l, op, r) => match (side_value(l, p), side_value(r, p)) {
            (Ok(a), Ok(b)) => holds(a, op, b),
            (Err(a), Err(b)) => holds(a, op, b),
            _ => unreachable!("generator never mixes kinds"),
        },
        Gen::Addr(q) => {
            let Some(addr) = &p.address else { return false };
            let q = q.to_lowercase();
            let needle = match q.as_str() {
                "uk" => "united kingdom".to_string(),
                "us" => "united states".to_string(),
                other => other.to_string(),
            };
            addr.to_lowercase().contains(&needle)
        }
    }
}
