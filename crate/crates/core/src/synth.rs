//! Deterministic synthetic fixtures for offline tests and demos.
//!
//! Everything here is generated from explicit seeds: a small photo history
//! with three fireworks nights and a beach day, random corpora and memory
//! graphs, planted retrieval problems and a mock agent of fixed accuracy.

use std::collections::HashMap;

use chrono::{Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::agent::{SessionStatus, ANSWER_PHRASE};
use crate::chat::{ChatReply, ToolCall};
use crate::client::ClientError;
use crate::corpus::{Corpus, Photo};
use crate::evalkit::{EvalError, QueryRecord, QueryType, RunOutcome, SessionRunner};
use crate::memgraph::{
    build_graph, clue_node_id, photo_node_id, ClueAnnotation, GraphEdge, MemoryGraph, PersonAnnotation,
};
use crate::vecindex::{Embedder, EmbeddingIndex, HashEmbedder};

pub const CASE_ONE_DIM: usize = 256;
pub const CASE_ONE_QUERY: &str =
    "Find all photos with the sea taken at the beach two days after watching the fireworks show.";
pub const CASE_ONE_GOLD: [&str; 3] = ["6009707544", "6009157655", "6009152901"];

fn photo(id: String, set: &str, ts: chrono::DateTime<Utc>, address: &str, caption: &str) -> Photo {
    Photo {
        photo_id: id,
        photoset_id: set.to_string(),
        timestamp: ts,
        latitude: None,
        longitude: None,
        address: Some(address.to_string()),
        caption: Some(caption.to_string()),
        image_ref: None,
    }
}

fn at(y: i32, m: u32, d: u32, h: u32, min: u32) -> chrono::DateTime<Utc> {
    Utc.with_ymd_and_hms(y, m, d, h, min, 0)
        .single()
        .expect("valid fixture time")
}

/// A photo history where the beach photos can only be told apart by
/// their date relative to a fireworks night.
pub struct CaseOne {
    pub corpus: Corpus,
    pub index: EmbeddingIndex,
    pub embedder: HashEmbedder,
    pub query: String,
    pub gold: Vec<String>,
    pub fireworks: Vec<String>,
    pub aug_5: Vec<String>,
    pub jul_31: Vec<String>,
}

pub fn case_one() -> CaseOne {
    let mut photos = Vec::new();
    let mut next = 6_009_300_000u64;
    let mut fresh = || {
        next += 1;
        next.to_string()
    };
    let mut fireworks = Vec::new();
    let nights = [
        (
            "fw-2012-08-03",
            at(2012, 8, 3, 21, 30),
            "Pier Approach, Bournemouth, England, United Kingdom",
        ),
        (
            "fw-2012-06-04",
            at(2012, 6, 4, 22, 0),
            "Coombe Hill, Wendover, England, United Kingdom",
        ),
        (
            "fw-2011-07-29",
            at(2011, 7, 29, 21, 45),
            "Bournemouth Pier, Bournemouth, England, United Kingdom",
        ),
    ];
    let views = [
        "fireworks show bursting over the crowd",
        "fireworks show with red and gold sparks",
        "long exposure of the fireworks show",
        "crowd watching the fireworks show",
        "final burst of the fireworks show",
    ];
    for (set, start, addr) in nights {
        for (i, caption) in views.iter().enumerate() {
            let id = fresh();
            fireworks.push(id.clone());
            photos.push(photo(id, set, start + Duration::minutes(3 * i as i64), addr, caption));
        }
    }

    let mut aug_5 = Vec::new();
    let parade = [
        "carnival parade float with dancers",
        "marching band in the town street",
        "children with painted faces at the carnival",
        "parade costumes and drums",
        "town square market stalls",
    ];
    for i in 0..26 {
        let id = fresh();
        aug_5.push(id.clone());
        photos.push(photo(
            id,
            "carnival-2012-08-05",
            at(2012, 8, 5, 11, 0) + Duration::minutes(9 * i),
            "Old Christchurch Road, Bournemouth, England, United Kingdom",
            parade[i as usize % parade.len()],
        ));
    }

    let mut jul_31 = Vec::new();
    let beach_day: [(&str, &str); 8] = [
        ("", "hotel breakfast table"),
        (CASE_ONE_GOLD[0], "the sea seen from the sandy beach"),
        ("", "ice cream stand on the promenade"),
        (CASE_ONE_GOLD[1], "waves of the sea rolling onto the beach"),
        ("", "amusement arcade games"),
        (CASE_ONE_GOLD[2], "calm sea and beach huts along the shore"),
        ("", "fish and chips on a bench"),
        ("", "hotel room with a view of the car park"),
    ];
    for (i, (gold, caption)) in beach_day.iter().enumerate() {
        let id = if gold.is_empty() { fresh() } else { gold.to_string() };
        jul_31.push(id.clone());
        photos.push(photo(
            id,
            "seaside-2011-07-31",
            at(2011, 7, 31, 10, 0) + Duration::minutes(25 * i as i64),
            "Bournemouth Beach, Bournemouth, England, United Kingdom",
            caption,
        ));
    }

    // beach days that are not two days after any fireworks night
    for (set, day, caption) in [
        (
            "cornwall-2010-05-02",
            at(2010, 5, 2, 14, 0),
            "the sea and a sandy beach in Cornwall",
        ),
        (
            "brighton-2012-06-08",
            at(2012, 6, 8, 15, 0),
            "pebble beach and grey sea at Brighton",
        ),
        (
            "dorset-2011-08-14",
            at(2011, 8, 14, 12, 0),
            "sea cliffs above the beach",
        ),
    ] {
        photos.push(photo(fresh(), set, day, "England, United Kingdom", caption));
    }

    let corpus = Corpus::from_photos("case-one", photos).expect("fixture corpus is valid");
    let embedder = HashEmbedder::new(CASE_ONE_DIM);
    let index = EmbeddingIndex::build_from_captions(&corpus, &embedder).expect("fixture index builds");
    CaseOne {
        corpus,
        index,
        embedder,
        query: CASE_ONE_QUERY.to_string(),
        gold: CASE_ONE_GOLD.iter().map(|s| s.to_string()).collect(),
        fireworks,
        aug_5,
        jul_31,
    }
}

/// Replies replaying the published trace: find the fireworks nights, read
/// their dates, filter the days two days later, search and inspect each,
/// then answer.
pub fn case_one_script(f: &CaseOne) -> Vec<ChatReply> {
    let call = |name: &str, args: serde_json::Value| ToolCall::new(name, args);
    vec![
        ChatReply::calls(vec![call(
            "ImageSearch",
            json!({"text": "fireworks show", "top_k": 15}),
        )]),
        ChatReply::calls(vec![call(
            "GetMetadata",
            json!({"photos": f.fireworks, "fields": ["time", "address"]}),
        )]),
        ChatReply::calls(vec![
            call(
                "FilterMetadata",
                json!({"expression": "time.date == \"2012-08-05\"", "save_as": "aug_5"}),
            ),
            call("FilterMetadata", json!({"expression": "time.date == \"2012-06-06\""})),
            call(
                "FilterMetadata",
                json!({"expression": "time.date == \"2011-07-31\"", "save_as": "jul_31"}),
            ),
        ]),
        ChatReply::calls(vec![
            call(
                "ImageSearch",
                json!({"text": "sea beach", "search_within": "jul_31", "top_k": 3}),
            ),
            call("ImageSearch", json!({"text": "sea beach", "search_within": "aug_5"})),
        ]),
        ChatReply::calls(vec![
            call("ViewPhotos", json!({"photos": f.jul_31})),
            call("ViewPhotos", json!({"photos": f.aug_5[..20].to_vec()})),
        ]),
        ChatReply::text(format!(
            "The sea is visible in three photos from 2011-07-31, two days after the Bournemouth Pier fireworks. \
August 5 2012 was spent at the carnival. {ANSWER_PHRASE} [{}].",
            f.gold.join(", ")
        )),
    ]
}

const STREETS: [&str; 6] = [
    "High Street, Oxford, England, United Kingdom",
    "Rue de Rivoli, Paris, France",
    "Market Street, San Francisco, California, United States",
    "Shibuya, Tokyo, Japan",
    "Bondi Beach, Sydney, New South Wales, Australia",
    "Pier Approach, Bournemouth, England, United Kingdom",
];

const CAPTION_WORDS: [&str; 12] = [
    "beach",
    "sea",
    "dog",
    "cake",
    "mountain",
    "bridge",
    "concert",
    "market",
    "snow",
    "lighthouse",
    "train",
    "garden",
];

/// Random corpus of `n` photos spread over 2010-2014 in photosets of 1-8
/// consecutive photos. About one address in ten is missing.
pub fn random_corpus(seed: u64, n: usize) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut photos = Vec::with_capacity(n);
    let mut set = 0usize;
    let mut left = 0usize;
    let mut t = at(2010, 1, 1, 0, 0);
    let span = Duration::days(5 * 365);
    for i in 0..n {
        if left == 0 {
            set += 1;
            left = rng.gen_range(1..=8);
            t = at(2010, 1, 1, 0, 0) + Duration::minutes(rng.gen_range(0..span.num_minutes()));
        }
        left -= 1;
        t += Duration::minutes(rng.gen_range(1..240));
        let words: Vec<&str> = CAPTION_WORDS.choose_multiple(&mut rng, 2).copied().collect();
        photos.push(Photo {
            photo_id: format!("p{i:04}"),
            photoset_id: format!("s{set:03}"),
            timestamp: t,
            latitude: None,
            longitude: None,
            address: (!rng.gen_bool(0.1)).then(|| STREETS[rng.gen_range(0..STREETS.len())].to_string()),
            caption: Some(words.join(" and ")),
            image_ref: None,
        });
    }
    Corpus::from_photos(format!("synthetic-{seed}"), photos).expect("generated corpus is valid")
}

/// Random memory graph: 0-3 clues per photo, people from a small pool and
/// association edges from random clues to photos of other photosets.
pub fn random_graph(seed: u64) -> (Corpus, MemoryGraph) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let corpus = random_corpus(seed, rng.gen_range(5..40));
    let ids: Vec<String> = corpus.iter_chronological().map(|p| p.photo_id.clone()).collect();
    let mut clues = Vec::new();
    let mut persons = Vec::new();
    for id in &ids {
        let n = rng.gen_range(0..=3);
        if n > 0 {
            clues.push(ClueAnnotation {
                photo_id: id.clone(),
                clues: CAPTION_WORDS
                    .choose_multiple(&mut rng, n)
                    .map(|w| format!("the {w}"))
                    .collect(),
            });
        }
        if rng.gen_bool(0.3) {
            persons.push(PersonAnnotation {
                photo_id: id.clone(),
                persons: vec![format!("person{}", rng.gen_range(0..5))],
            });
        }
    }
    let mut graph = build_graph(&corpus, &clues, &persons).expect("annotations reference corpus photos");
    for _ in 0..rng.gen_range(0..=clues.len()) {
        let a = &clues[rng.gen_range(0..clues.len())];
        let clue = clue_node_id(&a.photo_id, rng.gen_range(0..a.clues.len()));
        let target = &ids[rng.gen_range(0..ids.len())];
        if target != &a.photo_id {
            let _ = graph.add_edge(GraphEdge::association(&clue, &photo_node_id(target), "same entity"));
        }
    }
    (corpus, graph)
}

/// A photo whose incident edges split 1 : `many` between two edge types.
/// Returns the corpus, graph and pivot node id.
pub fn two_type_graph(many: usize) -> (Corpus, MemoryGraph, String) {
    let corpus = Corpus::from_photos(
        "two-type",
        vec![photo("x".into(), "S", at(2012, 1, 1, 12, 0), STREETS[0], "x")],
    )
    .expect("fixture corpus is valid");
    let clues = vec![ClueAnnotation {
        photo_id: "x".into(),
        clues: (0..many).map(|i| format!("clue {i}")).collect(),
    }];
    let graph = build_graph(&corpus, &clues, &[]).expect("fixture graph builds");
    (corpus, graph, photo_node_id("x"))
}

/// A mock agent that answers exactly the gold set with probability `p`.
/// Otherwise it drops a random non-empty part of the gold set and adds 1-3
/// distractors drawn from `pool`. Each (query, repeat) has its own stream, so
/// results do not depend on scheduling.
pub struct MockAccuracyRunner {
    pub p: f64,
    pub seed: u64,
    pub pool: Vec<String>,
}

impl MockAccuracyRunner {
    pub fn new(p: f64, seed: u64, pool: Vec<String>) -> Self {
        Self { p, seed, pool }
    }

    fn stream(&self, query: &QueryRecord, repeat: usize) -> ChaCha8Rng {
        let h = query.query_id.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
            (h ^ b as u64).wrapping_mul(0x100_0000_01b3)
        });
        ChaCha8Rng::seed_from_u64(self.seed ^ h ^ (repeat as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }

    pub fn predict(&self, query: &QueryRecord, repeat: usize) -> Vec<String> {
        let mut rng = self.stream(query, repeat);
        if rng.gen_bool(self.p) {
            return query.gold.clone();
        }
        let mut kept = query.gold.clone();
        kept.shuffle(&mut rng);
        let drop = rng.gen_range(1..=kept.len());
        kept.truncate(kept.len() - drop);
        let distractors: Vec<&String> = self.pool.iter().filter(|id| !query.gold.contains(id)).collect();
        let n = rng.gen_range(1..=3).min(distractors.len());
        kept.extend(distractors.choose_multiple(&mut rng, n).map(|s| s.to_string()));
        kept
    }
}

impl SessionRunner for MockAccuracyRunner {
    fn run(&self, query: &QueryRecord, repeat: usize) -> Result<RunOutcome, EvalError> {
        Ok(RunOutcome {
            predicted: self.predict(query, repeat),
            status: Some(SessionStatus::Answered),
            turns: 1,
        })
    }
}

/// Random queries over photo ids `p0000..`: 1-5 gold photos each, types
/// alternating.
pub fn random_queries(seed: u64, n: usize, n_photos: usize) -> Vec<QueryRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<String> = (0..n_photos).map(|i| format!("p{i:04}")).collect();
    (0..n)
        .map(|i| {
            let size = rng.gen_range(1..=5);
            QueryRecord {
                query_id: format!("q{i:04}"),
                user_id: "synthetic".into(),
                text: format!("query {i}"),
                query_type: if i % 2 == 0 {
                    QueryType::IntraEvent
                } else {
                    QueryType::InterEvent
                },
                gold: ids.choose_multiple(&mut rng, size).cloned().collect(),
            }
        })
        .collect()
}

/// Text embedder backed by a fixed table.
pub struct TableEmbedder {
    pub table: HashMap<String, Vec<f64>>,
}

impl Embedder for TableEmbedder {
    fn embed_text(&self, text: &str) -> Result<Vec<f64>, ClientError> {
        self.table
            .get(text)
            .cloned()
            .ok_or_else(|| ClientError::Protocol(format!("no embedding for {text:?}")))
    }

    fn embed_images(&self, _: &[String]) -> Result<Vec<f64>, ClientError> {
        Err(ClientError::Unconfigured(
            "table embedder has no image embeddings".into(),
        ))
    }
}

pub struct PlantedRetrieval {
    pub index: EmbeddingIndex,
    pub embedder: TableEmbedder,
    pub queries: Vec<QueryRecord>,
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    // Box-Muller
    (0..dim)
        .map(|_| {
            let (u1, u2): (f64, f64) = (rng.gen_range(f64::EPSILON..1.0), rng.gen());
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        })
        .collect()
}

fn near(rng: &mut ChaCha8Rng, center: &[f64], noise: f64) -> Vec<f64> {
    let g = gaussian(rng, center.len());
    unit(center.iter().zip(g).map(|(c, e)| c + noise * e).collect())
}

/// Queries with one gold photo each over `n_photos` random photos.
///
/// Normally the gold photo lies next to its query direction. With
/// `adversarial`, it points the opposite way while ten distractors crowd
/// the query direction, pushing gold below rank ten.
pub fn planted_retrieval(
    seed: u64,
    n_photos: usize,
    n_queries: usize,
    dim: usize,
    adversarial: bool,
) -> PlantedRetrieval {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<(String, Vec<f64>)> = Vec::with_capacity(n_photos);
    let mut table = HashMap::new();
    let mut queries = Vec::with_capacity(n_queries);
    let planted = if adversarial { 11 } else { 1 };
    for q in 0..n_queries {
        let dir = unit(gaussian(&mut rng, dim));
        let text = format!("planted query {q}");
        let gold_id = format!("p{:05}", rows.len());
        let gold_vec = if adversarial {
            near(&mut rng, &dir.iter().map(|x| -x).collect::<Vec<_>>(), 0.01)
        } else {
            near(&mut rng, &dir, 0.01)
        };
        rows.push((gold_id.clone(), gold_vec));
        for _ in 1..planted {
            let id = format!("p{:05}", rows.len());
            rows.push((id, near(&mut rng, &dir, 0.01)));
        }
        table.insert(text.clone(), dir);
        queries.push(QueryRecord {
            query_id: format!("q{q:04}"),
            user_id: "planted".into(),
            text,
            query_type: QueryType::IntraEvent,
            gold: vec![gold_id],
        });
    }
    while rows.len() < n_photos {
        let id = format!("p{:05}", rows.len());
        rows.push((id, unit(gaussian(&mut rng, dim))));
    }
    PlantedRetrieval {
        index: EmbeddingIndex::from_rows(dim, rows).expect("planted rows are valid"),
        embedder: TableEmbedder { table },
        queries,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_one_shape() {
        let f = case_one();
        assert_eq!(f.fireworks.len(), 15);
        assert_eq!(f.aug_5.len(), 26);
        assert_eq!(f.jul_31.len(), 8);
        assert!(f.gold.iter().all(|g| f.jul_31.contains(g)));
        assert_eq!(f.corpus.photosets().count(), 8);
    }

    #[test]
    fn generators_are_seeded() {
        let a = random_graph(11).1.to_jsonl();
        assert_eq!(a, random_graph(11).1.to_jsonl());
        let q = &random_queries(1, 1, 50)[0];
        let m = MockAccuracyRunner::new(0.0, 3, (0..50).map(|i| format!("p{i:04}")).collect());
        let pred = m.predict(q, 0);
        assert_eq!(pred, m.predict(q, 0));
        assert_ne!(crate::evalkit::em(&pred, &q.gold), 1.0);
    }
}
