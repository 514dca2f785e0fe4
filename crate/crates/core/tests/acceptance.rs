//! Offline acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails or exceeds its time budget.

mod common;

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use seeker::agent::{run_session, Agent, AgentConfig, SessionResult, SessionStatus};
use seeker::chat::{ChatReply, Message, ScriptedChatClient, ToolCall};
use seeker::evalkit::{
    baseline_retrieve, em, f1, iou, ranking_metrics, run_benchmark, BenchmarkOptions, EvalError, QueryRecord,
    RunMetadata, RunOutcome, DEFAULT_KS,
};
use seeker::filterdsl::{self, filter_scope, AliasTable, FilterContext};
use seeker::memgraph::{
    sample_subgraph, sample_subgraph_observed, serialize_subgraph, MemoryGraph, NodeKind, SamplerStep, Subgraph,
    DEFAULT_EDGE_LIMIT,
};
use seeker::memory::{ContextMemory, FixedSummarizer, DEFAULT_TOKEN_LIMIT};
use seeker::synth;
use seeker::toolkit::{tool_schemas, ToolName, ToolSet};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64, what: &str) -> Result<(), String> {
    ensure((a - b).abs() <= tol, || format!("{what}: {a} vs {b}"))
}

fn ids(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

// ------------------------------------------------------------------ 1

fn metric_oracle() -> Outcome {
    close(
        f1(&ids(&["a", "b", "c"]), &ids(&["b", "c", "d"])),
        2.0 / 3.0,
        1e-12,
        "worked f1",
    )?;
    let r = ranking_metrics(&ids(&["x", "a", "y"]), &ids(&["a"]), &[3]).map_err(|e| e.to_string())?;
    close(r[&3].ndcg, 1.0 / 3f64.log2(), 1e-12, "worked ndcg@3")?;
    let r = ranking_metrics(&ids(&["a", "x", "b"]), &ids(&["a", "b"]), &[3]).map_err(|e| e.to_string())?;
    close(r[&3].map, 5.0 / 6.0, 1e-12, "worked map@3")?;

    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    let universe: Vec<String> = (0..12).map(|i| format!("id{i}")).collect();
    for t in 0..1000 {
        let p = common::random_subset(&mut rng, &universe, 8);
        let g = common::random_subset(&mut rng, &universe, 8);
        close(em(&p, &g), common::brute_em(&p, &g), 0.0, &format!("em pair {t}"))?;
        close(f1(&p, &g), common::brute_f1(&p, &g), 1e-12, &format!("f1 pair {t}"))?;
        close(iou(&p, &g), common::brute_iou(&p, &g), 1e-12, &format!("iou pair {t}"))?;
    }
    let pool: Vec<String> = (0..30).map(|i| format!("r{i}")).collect();
    for t in 0..200 {
        let ranking = common::random_subset(&mut rng, &pool, 30);
        let gold = common::random_subset(&mut rng, &pool, 8);
        let got = ranking_metrics(&ranking, &gold, &DEFAULT_KS).map_err(|e| e.to_string())?;
        for k in DEFAULT_KS {
            let (map, recall, ndcg) = common::brute_rank(&ranking, &gold, k);
            let s = got[&k];
            close(s.map, map, 1e-12, &format!("map@{k} ranking {t}"))?;
            close(s.recall, recall, 1e-12, &format!("recall@{k} ranking {t}"))?;
            close(s.ndcg, ndcg, 1e-12, &format!("ndcg@{k} ranking {t}"))?;
        }
    }
    Ok("1000 pairs, 200 rankings, worked values exact".into())
}

// ------------------------------------------------------------------ 2

fn retrieval_sanity() -> Outcome {
    let planted = synth::planted_retrieval(7, 2000, 100, 64, false);
    let r = baseline_retrieve(&planted.queries, &planted.index, &planted.embedder, &DEFAULT_KS)
        .map_err(|e| e.to_string())?;
    ensure(r.failed == 0, || format!("{} planted queries failed", r.failed))?;
    for (k, s) in &r.mean {
        ensure(s.map == 1.0 && s.recall == 1.0 && s.ndcg == 1.0, || {
            format!("planted @{k}: {s:?}")
        })?;
    }
    let adv = synth::planted_retrieval(8, 2000, 100, 64, true);
    let r = baseline_retrieve(&adv.queries, &adv.index, &adv.embedder, &DEFAULT_KS).map_err(|e| e.to_string())?;
    for (k, s) in &r.mean {
        ensure(s.map == 0.0 && s.recall == 0.0 && s.ndcg == 0.0, || {
            format!("adversarial @{k}: {s:?}")
        })?;
    }
    Ok("planted = 1.0, adversarial = 0.0 at k in {1,3,5,10} on 2000 photos".into())
}

// ------------------------------------------------------------------ 3

fn filter_equivalence() -> Outcome {
    let corpus = synth::random_corpus(99, 200);
    let aliases = AliasTable::builtin();
    let ctx = FilterContext::new(&aliases, None);
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let mut nonempty = 0;
    for i in 0..500 {
        let g = common::gen_expr(&mut rng, 4);
        let text = common::render(&g, &mut rng);
        let expr = filterdsl::parse(&text).map_err(|e| format!("expression {i} {text:?}: {e}"))?;
        let got = filter_scope(&corpus, &expr, None, &ctx);
        let want: Vec<String> = corpus
            .iter_chronological()
            .filter(|p| common::oracle(&g, p))
            .map(|p| p.photo_id.clone())
            .collect();
        ensure(got == want, || {
            format!("expression {i} {text:?}: {} vs {} matches", got.len(), want.len())
        })?;
        nonempty += usize::from(!want.is_empty() && want.len() < corpus.len());
    }
    ensure(nonempty >= 100, || {
        format!("only {nonempty} expressions were selective")
    })?;

    let vocab: [&[u8]; 14] = [
        b"time.",
        b"year",
        b"date",
        b" and ",
        b" or ",
        b"not ",
        b"(",
        b")",
        b"==",
        b"<=",
        b"\"",
        b"match_address(address,",
        b"2012",
        b"\\u",
    ];
    for _ in 0..10_000 {
        let mut bytes = Vec::new();
        for _ in 0..rng.gen_range(0..24) {
            if rng.gen_bool(0.5) {
                bytes.extend_from_slice(vocab[rng.gen_range(0..vocab.len())]);
            } else {
                bytes.push(rng.gen());
            }
        }
        let _ = filterdsl::parse(&String::from_utf8_lossy(&bytes));
    }
    Ok(format!(
        "500 expressions identical ({nonempty} selective), 10000 fuzz inputs parsed without panic"
    ))
}

// ------------------------------------------------------------------ 4

fn connected(s: &Subgraph, g: &MemoryGraph) -> bool {
    let mut adj: HashMap<&str, Vec<&str>> = HashMap::new();
    for e in s.edge_indices().map(|i| g.edge(i)) {
        adj.entry(&e.src).or_default().push(&e.dst);
        adj.entry(&e.dst).or_default().push(&e.src);
    }
    let mut seen: HashSet<&str> = HashSet::from([s.pivot.as_str()]);
    let mut queue = VecDeque::from([s.pivot.as_str()]);
    while let Some(n) = queue.pop_front() {
        for &m in adj.get(n).into_iter().flatten() {
            if seen.insert(m) {
                queue.push_back(m);
            }
        }
    }
    s.nodes.iter().all(|n| seen.contains(n.as_str()))
}

fn completion_holds(s: &Subgraph, g: &MemoryGraph) -> Result<(), String> {
    for id in &s.nodes {
        let kind = g.node(id).map(|n| n.kind);
        let want = match kind {
            Some(NodeKind::VisualClue) => NodeKind::Photo,
            Some(NodeKind::Photo) => NodeKind::Photoset,
            _ => continue,
        };
        let ok = s.edge_indices().map(|i| g.edge(i)).any(|e| {
            e.dst == *id
                && e.type_label != seeker::memgraph::SAME_CLUE_AS
                && g.node(&e.src).map(|n| n.kind) == Some(want)
        });
        ensure(ok, || format!("{id} lacks its parent {want}"))?;
    }
    Ok(())
}

fn sampler_invariants() -> Outcome {
    let mut samples = 0;
    for gseed in 0..100u64 {
        let (corpus, graph) = synth::random_graph(gseed);
        let photos: Vec<&str> = graph
            .nodes()
            .iter()
            .filter(|n| n.kind == NodeKind::Photo)
            .map(|n| n.node_id.as_str())
            .collect();
        for seed in 0..100u64 {
            let pivot = photos[(seed as usize * 7 + gseed as usize) % photos.len()];
            let mut removed_ok = true;
            let mut taken: HashSet<usize> = HashSet::new();
            let s = sample_subgraph_observed(&graph, pivot, DEFAULT_EDGE_LIMIT, seed, |step| match step {
                SamplerStep::Expanded { edge, .. } => {
                    taken.insert(*edge);
                }
                SamplerStep::Removed { node } => {
                    removed_ok &= graph.incident(node).iter().all(|e| taken.contains(e));
                }
            })
            .map_err(|e| e.to_string())?;
            let ctx = || format!("graph {gseed} seed {seed}");
            ensure(removed_ok, || {
                format!("{}: frontier node removed with unexpanded edges", ctx())
            })?;
            ensure(s.sampled_edges.len() <= DEFAULT_EDGE_LIMIT, || {
                format!("{}: over budget", ctx())
            })?;
            ensure(connected(&s, &graph), || format!("{}: not connected", ctx()))?;
            completion_holds(&s, &graph).map_err(|e| format!("{}: {e}", ctx()))?;
            let again = sample_subgraph(&graph, pivot, DEFAULT_EDGE_LIMIT, seed).map_err(|e| e.to_string())?;
            let a = serialize_subgraph(&s, &graph, &corpus).map_err(|e| e.to_string())?;
            let b = serialize_subgraph(&again, &graph, &corpus).map_err(|e| e.to_string())?;
            ensure(a == b, || format!("{}: serialization differs between runs", ctx()))?;
            samples += 1;
        }
    }

    let (_, graph, pivot) = synth::two_type_graph(100);
    let trials = 10_000;
    let mut contains = 0;
    for seed in 0..trials {
        let s = sample_subgraph(&graph, &pivot, 1, seed).map_err(|e| e.to_string())?;
        contains += usize::from(graph.edge(s.sampled_edges[0]).type_label == seeker::memgraph::CONTAINS);
    }
    let freq = contains as f64 / trials as f64;
    close(freq, 0.5, 0.05, "rare-type frequency")?;
    Ok(format!(
        "{samples} samples hold every invariant; rare type chosen {freq:.3} of first expansions"
    ))
}

// ------------------------------------------------------------------ 5

fn scripted_replay() -> Outcome {
    let f = synth::case_one();
    let aliases = AliasTable::builtin();
    let mut agent = Agent::new(&f.corpus, &f.index, &aliases);
    agent.embedder = Some(&f.embedder);
    let config = AgentConfig {
        retry_base_delay_ms: 0,
        ..Default::default()
    };
    let chat = ScriptedChatClient::new(synth::case_one_script(&f));
    let r = run_session(&f.query, &agent, &config, &chat);
    ensure(r.status == SessionStatus::Answered, || format!("status {:?}", r.status))?;
    ensure(r.turns <= 10, || format!("{} turns", r.turns))?;
    ensure(
        em(&r.predicted, &f.gold) == 1.0 && f1(&r.predicted, &f.gold) == 1.0,
        || format!("predicted {:?}", r.predicted),
    )?;

    let counts: Vec<u64> = r
        .calls
        .iter()
        .filter(|c| c.call.name == "FilterMetadata")
        .map(|c| c.result.payload["count"].as_u64().unwrap_or(u64::MAX))
        .collect();
    ensure(counts == [26, 0, 8], || format!("filter counts {counts:?}"))?;
    let scoped = r
        .calls
        .iter()
        .find(|c| c.call.name == "ImageSearch" && c.call.arguments["search_within"] == "jul_31")
        .ok_or("scoped search missing")?;
    let top: BTreeSet<String> = scoped.result.payload["results"]
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(|h| h["photo_id"].as_str().map(str::to_string))
        .collect();
    ensure(top == f.gold.iter().cloned().collect(), || {
        format!("scoped top-3 {top:?}")
    })?;
    ensure(r.calls.iter().all(|c| c.result.ok), || "a replayed call failed".into())?;
    Ok(format!("answered in {} turns, EM = 1, F1 = 1", r.turns))
}

// ------------------------------------------------------------------ 6

fn turn_and_context_limits() -> Outcome {
    let corpus = synth::random_corpus(5, 30);
    let index =
        seeker::vecindex::EmbeddingIndex::build_from_captions(&corpus, &seeker::vecindex::HashEmbedder::new(32))
            .map_err(|e| e.to_string())?;
    let aliases = AliasTable::builtin();
    let config = AgentConfig {
        retry_base_delay_ms: 0,
        ..Default::default()
    };
    let idle = run_session(
        "anything",
        &Agent::new(&corpus, &index, &aliases),
        &config,
        &ScriptedChatClient::never_answers(),
    );
    ensure(
        idle.turns == 30 && idle.status == SessionStatus::TurnLimit && idle.predicted.is_empty(),
        || format!("idle session: {} turns, {:?}", idle.turns, idle.status),
    )?;

    // memory-level trigger: crossing the threshold, not reaching it, compresses
    let mut mem = ContextMemory::new(Message::system("sys"), Message::user("query"), DEFAULT_TOKEN_LIMIT);
    let chunk = "x".repeat(4 * 992);
    let mut crossed_at = None;
    while mem.budget().current < 150_000 {
        let before = mem.budget().current;
        ensure(!mem.should_compress() || before > DEFAULT_TOKEN_LIMIT, || {
            "compressed below limit".into()
        })?;
        mem.push(Message::assistant(chunk.clone(), vec![]));
        if crossed_at.is_none() && mem.should_compress() {
            crossed_at = Some((before, mem.budget().current));
        }
    }
    let (below, above) = crossed_at.ok_or("never triggered")?;
    ensure(below <= DEFAULT_TOKEN_LIMIT && above > DEFAULT_TOKEN_LIMIT, || {
        format!("triggered between {below} and {above}")
    })?;
    let ev = mem
        .compress(&FixedSummarizer { bytes: 4096 })
        .map_err(|e| e.to_string())?;
    ensure(ev.tokens_after * 4 < DEFAULT_TOKEN_LIMIT, || {
        format!("{} tokens after compression", ev.tokens_after)
    })?;

    // session-level: the subset registry survives compression unchanged
    let big = "y".repeat(4 * 80_000);
    let script = |with_big: bool| {
        ScriptedChatClient::new(vec![
            ChatReply::calls(vec![ToolCall::new(
                "FilterMetadata",
                json!({"expression": "time.year >= 2010", "save_as": "all"}),
            )]),
            ChatReply {
                content: if with_big { big.clone() } else { String::new() },
                tool_calls: vec![ToolCall::new(
                    "ImageSearch",
                    json!({"text": "dog", "top_k": 3, "save_as": "dogs"}),
                )],
            },
            ChatReply {
                content: if with_big { big.clone() } else { String::new() },
                tool_calls: vec![],
            },
            ChatReply::text(format!(
                "The final answer is: [{}].",
                corpus.iter_chronological().next().unwrap().photo_id
            )),
        ])
    };
    let summarizer = FixedSummarizer { bytes: 4096 };
    let mut agent = Agent::new(&corpus, &index, &aliases);
    agent.summarizer = Some(&summarizer);
    let compressed = run_session("find the dog", &agent, &config, &script(true));
    let plain = run_session("find the dog", &agent, &config, &script(false));
    ensure(compressed.compressions >= 1, || "no compression happened".into())?;
    ensure(plain.compressions == 0, || "control run compressed".into())?;
    ensure(compressed.registry.to_bytes() == plain.registry.to_bytes(), || {
        "registry changed".into()
    })?;
    ensure(compressed.status == SessionStatus::Answered, || {
        format!("{:?}", compressed.status)
    })?;
    Ok(format!(
        "30-turn cap holds; triggered on crossing {DEFAULT_TOKEN_LIMIT} ({below} -> {above}), compressed {} -> {} tokens; registry byte-identical",
        ev.tokens_before, ev.tokens_after
    ))
}

// ------------------------------------------------------------------ 7

fn ablation_wiring() -> Outcome {
    let f = synth::case_one();
    let aliases = AliasTable::builtin();
    let mut agent = Agent::new(&f.corpus, &f.index, &aliases);
    agent.embedder = Some(&f.embedder);
    let base = AgentConfig {
        retry_base_delay_ms: 0,
        ..Default::default()
    };
    let probe = |name: &str| -> serde_json::Value {
        match name {
            "ImageSearch" => json!({"text": "sea"}),
            "GetMetadata" | "ViewPhotos" => json!({"photos": [f.gold[0]]}),
            "FilterMetadata" => json!({"expression": "time.year == 2011"}),
            "WebSearch" => json!({"query": "Bournemouth fireworks"}),
            _ => json!({}),
        }
    };
    let answer = format!("The final answer is: [{}].", f.gold[0]);
    for tool in ToolName::ALL {
        let config = AgentConfig {
            tools: ToolSet::all().without(tool),
            ..base.clone()
        };
        let schemas = tool_schemas(&config.effective_tools(), config.explicit_memory);
        ensure(schemas.iter().all(|s| s.name != tool.as_str()), || {
            format!("{tool:?} still advertised")
        })?;
        ensure(schemas.len() == ToolName::ALL.len() - 1, || {
            format!("{tool:?}: {} schemas", schemas.len())
        })?;
        let chat = ScriptedChatClient::new(vec![
            ChatReply::calls(vec![ToolCall::new(tool.as_str(), probe(tool.as_str()))]),
            ChatReply::text(answer.clone()),
        ]);
        let r = run_session(&f.query, &agent, &config, &chat);
        let res = &r.calls[0].result;
        ensure(!res.ok && res.text.contains("unknown tool"), || {
            format!("{tool:?} call: {}", res.text)
        })?;
        ensure(r.status == SessionStatus::Answered, || {
            format!("{tool:?}: {:?}", r.status)
        })?;
    }

    let no_state = AgentConfig {
        explicit_memory: false,
        ..base.clone()
    };
    let schemas = serde_json::to_string(&tool_schemas(&no_state.effective_tools(), false)).unwrap();
    for p in ["save_as", "search_within", "filter_within"] {
        ensure(!schemas.contains(p), || {
            format!("{p} advertised without explicit memory")
        })?;
    }
    let chat = ScriptedChatClient::new(vec![
        ChatReply::calls(vec![ToolCall::new(
            "FilterMetadata",
            json!({"expression": "time.year == 2011", "save_as": "s"}),
        )]),
        ChatReply::text(answer.clone()),
    ]);
    let r = run_session(&f.query, &agent, &no_state, &chat);
    ensure(!r.calls[0].result.ok && r.registry.is_empty(), || {
        "subset saved without explicit memory".into()
    })?;

    let no_compress = AgentConfig {
        compression: false,
        token_limit: 2_000,
        ..base.clone()
    };
    let schemas = tool_schemas(&no_compress.effective_tools(), true);
    ensure(schemas.iter().all(|s| s.name != "CompressMemory"), || {
        "CompressMemory advertised".into()
    })?;
    let summarizer = FixedSummarizer { bytes: 256 };
    let mut with_summarizer = agent;
    with_summarizer.summarizer = Some(&summarizer);
    let chat = ScriptedChatClient::new(vec![
        ChatReply::text("z".repeat(20_000)),
        ChatReply::text(answer.clone()),
    ]);
    let r = run_session(&f.query, &with_summarizer, &no_compress, &chat);
    ensure(r.compressions == 0 && r.status == SessionStatus::Answered, || {
        format!("compressions {} status {:?}", r.compressions, r.status)
    })?;
    Ok("6 tools and 2 memory mechanisms ablated cleanly".into())
}

// ------------------------------------------------------------------ 8

fn scaling_properties() -> Outcome {
    let queries = synth::random_queries(31, 1000, 200);
    let pool: Vec<String> = (0..200).map(|i| format!("p{i:04}")).collect();
    let mut summary = Vec::new();
    for p in [0.2, 0.5, 0.8] {
        let runner = synth::MockAccuracyRunner::new(p, 17, pool.clone());
        let opts = BenchmarkOptions {
            parallel: 8,
            repeats: 8,
            ..Default::default()
        };
        let report = run_benchmark(&queries, &runner, &opts).map_err(|e| e.to_string())?;
        for w in report.scaling.windows(2) {
            ensure(w[1].best_f1 + 1e-9 >= w[0].best_f1, || {
                format!("p={p}: Best@k F1 fell at k={}", w[1].k)
            })?;
        }
        for pt in &report.scaling {
            ensure(pt.majority_f1 <= pt.best_f1 + 1e-9, || {
                format!(
                    "p={p} k={}: majority {:.2} > best {:.2}",
                    pt.k, pt.majority_f1, pt.best_f1
                )
            })?;
        }
        let last = report.scaling.last().ok_or("no scaling series")?;
        summary.push(format!(
            "p={p}: best {:.1}->{:.1}, majority@8 {:.1}",
            report.scaling[0].best_f1, last.best_f1, last.majority_f1
        ));
    }
    Ok(summary.join("; "))
}

// ------------------------------------------------------------------ 9

fn concurrency_determinism() -> Outcome {
    let corpus = synth::random_corpus(77, 120);
    let index =
        seeker::vecindex::EmbeddingIndex::build_from_captions(&corpus, &seeker::vecindex::HashEmbedder::new(64))
            .map_err(|e| e.to_string())?;
    let aliases = AliasTable::builtin();
    let all: Vec<String> = corpus.iter_chronological().map(|p| p.photo_id.clone()).collect();
    let queries: Vec<QueryRecord> = synth::random_queries(5, 24, 120);
    let config = AgentConfig {
        retry_base_delay_ms: 0,
        ..Default::default()
    };
    let runner = |q: &QueryRecord, repeat: usize| -> Result<RunOutcome, EvalError> {
        let seed = q
            .query_id
            .bytes()
            .fold(repeat as u64, |h, b| h.wrapping_mul(31).wrapping_add(b as u64));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut answer: Vec<String> = q.gold.iter().filter(|_| rng.gen_bool(0.7)).cloned().collect();
        answer.push(all[rng.gen_range(0..all.len())].clone());
        let word = ["dog", "beach", "cake"][rng.gen_range(0..3)];
        let chat = ScriptedChatClient::new(vec![
            ChatReply::calls(vec![ToolCall::new(
                "ImageSearch",
                json!({"text": word, "top_k": 5, "save_as": "hits"}),
            )]),
            ChatReply::calls(vec![ToolCall::new(
                "FilterMetadata",
                json!({"expression": format!("time.year >= {}", rng.gen_range(2010..2015)), "filter_within": "hits"}),
            )]),
            ChatReply::text(format!("The final answer is: [{}].", answer.join(", "))),
        ]);
        let r: SessionResult = run_session(&q.text, &Agent::new(&corpus, &index, &aliases), &config, &chat);
        Ok(RunOutcome::from(&r))
    };
    let opts = |parallel| BenchmarkOptions {
        parallel,
        repeats: 2,
        metadata: RunMetadata {
            model: "scripted".into(),
            embedder: "hash-64".into(),
            config_digest: "fixed".into(),
            seed: 5,
        },
        ..Default::default()
    };
    let seq = run_benchmark(&queries, &runner, &opts(1)).map_err(|e| e.to_string())?;
    let par = run_benchmark(&queries, &runner, &opts(8)).map_err(|e| e.to_string())?;
    ensure(seq.to_json() == par.to_json(), || {
        "parallel report differs from sequential".into()
    })?;
    ensure(seq.render_table() == par.render_table(), || "tables differ".into())?;
    Ok(format!(
        "{} sessions on 8 workers, report byte-identical",
        queries.len() * 2
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("metric oracle equivalence", Duration::from_secs(5), metric_oracle),
        ("retrieval sanity", Duration::from_secs(10), retrieval_sanity),
        ("filter DSL equivalence", Duration::from_secs(30), filter_equivalence),
        ("sampler invariants", Duration::from_secs(60), sampler_invariants),
        ("end-to-end scripted replay", Duration::from_secs(5), scripted_replay),
        (
            "turn and context limits",
            Duration::from_secs(60),
            turn_and_context_limits,
        ),
        ("ablation wiring", Duration::from_secs(60), ablation_wiring),
        (
            "test-time scaling properties",
            Duration::from_secs(30),
            scaling_properties,
        ),
        (
            "concurrency determinism",
            Duration::from_secs(60),
            concurrency_determinism,
        ),
    ];
    let mut failed = 0;
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(_) if elapsed > budget => Err(format!("took {elapsed:.2?}, budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {name} [{elapsed:.2?}] {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name} [{elapsed:.2?}] {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
