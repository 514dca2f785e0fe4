use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::json;
use tempfile::TempDir;

fn seeker(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seeker"))
        .args(args)
        .env_remove("LLM_API_BASE")
        .env_remove("EMBED_API_BASE")
        .env_remove("SEARCH_API_KEY")
        .env_remove("GEOCODER_API_KEY")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Eight photos, five of them from 2012, over three photosets.
fn write_manifest(dir: &Path) -> PathBuf {
    let rows = [
        ("a1", "s1", "2012-03-01T10:00:00Z", "red kite over the hill"),
        ("a2", "s1", "2012-03-01T11:00:00Z", "kite string"),
        ("a3", "s1", "2012-03-02T09:00:00Z", "hill picnic"),
        ("b1", "s2", "2012-08-05T15:00:00Z", "sea at the beach"),
        ("b2", "s2", "2012-08-05T16:00:00Z", "sand castle beach"),
        ("c1", "s3", "2013-01-01T00:10:00Z", "fireworks show"),
        ("c2", "s3", "2013-01-01T00:20:00Z", "fireworks crowd"),
        ("c3", "s3", "2011-12-31T23:50:00Z", "countdown clock"),
    ];
    let text: String = rows
        .iter()
        .map(|(id, set, t, cap)| {
            json!({"photo_id": id, "photoset_id": set, "time": t, "caption": cap, "address": "Bournemouth, England, United Kingdom"})
                .to_string()
                + "\n"
        })
        .collect();
    let path = dir.join("u1.manifest.jsonl");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn filter_prints_count_and_ids() {
    let dir = TempDir::new().unwrap();
    let m = write_manifest(dir.path());
    let out = seeker(&["filter", "--expr", "time.year == 2012", "--corpus", p(&m)]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("count: 5\n"), "{text}");
    assert_eq!(text.lines().skip(1).collect::<Vec<_>>(), ["a1", "a2", "a3", "b1", "b2"]);

    let uk = seeker(&[
        "filter",
        "--expr",
        "match_address(address, \"uk\") and time.month == 8",
        "--corpus",
        p(&m),
    ]);
    assert!(stdout(&uk).starts_with("count: 2\n"));
}

#[test]
fn bad_filter_expression_is_a_validation_failure() {
    let dir = TempDir::new().unwrap();
    let m = write_manifest(dir.path());
    let out = seeker(&["filter", "--expr", "time.year ==", "--corpus", p(&m)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_subcommand_exits_2() {
    assert_eq!(seeker(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(seeker(&["filter", "--nope"]).status.code(), Some(2));
}

#[test]
fn ingest_reports_duplicates() {
    let dir = TempDir::new().unwrap();
    let m = write_manifest(dir.path());
    let ok = seeker(&["ingest", "--manifest", p(&m)]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("u1: 8 photos in 3 photosets"));

    let dup = dir.path().join("dup.jsonl");
    let line = json!({"photo_id": "p1", "photoset_id": "s", "time": "2012-01-01T00:00:00Z"}).to_string();
    fs::write(&dup, format!("{line}\n{line}\n")).unwrap();
    let bad = seeker(&["ingest", "--manifest", p(&dup)]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("p1"));
}

#[test]
fn graph_pipeline_and_empty_sample() {
    let dir = TempDir::new().unwrap();
    let m = write_manifest(dir.path());
    let clues = dir.path().join("clues.jsonl");
    fs::write(
        &clues,
        [
            json!({"photo_id": "a1", "clues": ["red kite"]}),
            json!({"photo_id": "c1", "clues": ["fireworks"]}),
        ]
        .map(|v| v.to_string() + "\n")
        .concat(),
    )
    .unwrap();
    let g = dir.path().join("graph.jsonl");
    let built = seeker(&[
        "graph",
        "build",
        "--corpus",
        p(&m),
        "--clues",
        p(&clues),
        "--out",
        p(&g),
    ]);
    assert_eq!(
        built.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&built.stderr)
    );
    // 3 photosets + 8 photos + 2 clues; 8 contains + 2 depicts edges
    assert!(stdout(&built).contains("13 nodes, 10 edges"));

    let e = dir.path().join("emb.jsonl");
    assert_eq!(
        seeker(&["index", "build", "--corpus", p(&m), "--out", p(&e), "--hash-dim", "64"])
            .status
            .code(),
        Some(0)
    );
    let mined = dir.path().join("mined.jsonl");
    let mine = seeker(&[
        "graph",
        "mine",
        "--graph",
        p(&g),
        "--corpus",
        p(&m),
        "--embeddings",
        p(&e),
        "--out",
        p(&mined),
        "--hash-dim",
        "64",
    ]);
    assert_eq!(mine.status.code(), Some(0), "{}", String::from_utf8_lossy(&mine.stderr));

    let sub = dir.path().join("sub.json");
    let out = seeker(&[
        "graph",
        "sample",
        "--graph",
        p(&mined),
        "--corpus",
        p(&m),
        "--pivot",
        "b1",
        "--edges",
        "0",
        "--out",
        p(&sub),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("# Photoset") && text.contains("# Photo"));
    assert!(text.contains("b1 | time:"));
    assert!(!text.contains("# VisualClue"));
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(&sub).unwrap()).unwrap();
    assert_eq!(s["nodes"].as_array().unwrap().len(), 2);

    let again = seeker(&[
        "graph",
        "serialize",
        "--graph",
        p(&mined),
        "--corpus",
        p(&m),
        "--subgraph",
        p(&sub),
    ]);
    assert_eq!(stdout(&again), text);
}

#[test]
fn case_one_fixture_answers() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("run");
    let out = seeker(&[
        "agent",
        "run",
        "--fixture",
        "case-one",
        "--repeats",
        "2",
        "--out",
        p(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("EM 100.0, F1 100.0"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["metadata"]["config_digest"].as_str().unwrap().len(), 16);
    assert!(out_dir.join("traces/case-one.0.jsonl").exists());

    let plot = dir.path().join("plot.json");
    let r = seeker(&[
        "report",
        "--report",
        p(&out_dir.join("report.json")),
        "--plot",
        p(&plot),
    ]);
    assert_eq!(r.status.code(), Some(0));
    let series: serde_json::Value = serde_json::from_str(&fs::read_to_string(&plot).unwrap()).unwrap();
    assert_eq!(series["k"], json!([1, 2]));
    assert_eq!(series["best_em"], json!([100.0, 100.0]));
}

#[test]
fn scripted_benchmark_and_scoring() {
    let dir = TempDir::new().unwrap();
    let m = write_manifest(dir.path());
    let e = dir.path().join("u1.embeddings.jsonl");
    assert_eq!(
        seeker(&["index", "build", "--corpus", p(&m), "--out", p(&e), "--hash-dim", "64"])
            .status
            .code(),
        Some(0)
    );
    let queries = dir.path().join("queries.jsonl");
    fs::write(
        &queries,
        [
            json!({"query_id": "q1", "user_id": "u1", "text": "beach photos", "type": "intra_event", "gold": ["b1", "b2"]}),
            json!({"query_id": "q2", "user_id": "u1", "text": "kite", "type": "inter_event", "gold": ["a1"]}),
            json!({"query_id": "q3", "user_id": "ghost", "text": "x", "type": "inter_event", "gold": ["zz"]}),
        ]
        .map(|v| v.to_string() + "\n")
        .concat(),
    )
    .unwrap();
    let script = dir.path().join("script.json");
    fs::write(
        &script,
        json!([
            {"tool_calls": [{"id": "", "name": "FilterMetadata", "arguments": {"expression": "time.month == 8", "save_as": "aug"}}]},
            {"content": "The final answer is: [b1, b2]"}
        ])
        .to_string(),
    )
    .unwrap();
    let out_dir = dir.path().join("bench");
    let out = seeker(&[
        "agent",
        "run",
        "--queries",
        p(&queries),
        "--data-dir",
        p(dir.path()),
        "--script",
        p(&script),
        "--hash-dim",
        "64",
        "--repeats",
        "2",
        "--parallel",
        "2",
        "--out",
        p(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    // q1 answered exactly, q2 wrong, q3 has no corpus and is excluded
    assert!(
        text.contains("queries: 2 scored (1 intra, 1 inter), 1 failed"),
        "{text}"
    );
    assert!(
        text.contains("100.0 |      0.0 |      0.0 |       50.0 |       50.0"),
        "{text}"
    );

    let preds = dir.path().join("preds.jsonl");
    fs::write(
        &preds,
        json!({"query_id": "q2", "predicted": ["a1"]}).to_string() + "\n",
    )
    .unwrap();
    let q2only = dir.path().join("q2.jsonl");
    fs::write(
        &q2only,
        fs::read_to_string(&queries)
            .unwrap()
            .lines()
            .nth(1)
            .unwrap()
            .to_string()
            + "\n",
    )
    .unwrap();
    let scored = seeker(&["eval", "score", "--queries", p(&q2only), "--predictions", p(&preds)]);
    assert_eq!(scored.status.code(), Some(0));
    assert!(
        stdout(&scored).contains("100.0 |      100.0 |      100.0"),
        "{}",
        stdout(&scored)
    );

    let base = seeker(&[
        "baseline",
        "retrieve",
        "--queries",
        p(&q2only),
        "--corpus",
        p(&m),
        "--embeddings",
        p(&e),
        "--hash-dim",
        "64",
    ]);
    assert_eq!(base.status.code(), Some(0), "{}", String::from_utf8_lossy(&base.stderr));
    assert!(stdout(&base).contains("Recall@10"));
}

#[test]
fn credentials_are_not_flags() {
    let help = stdout(&seeker(&["agent", "run", "--help"]));
    assert!(!help.to_lowercase().contains("api-key") && !help.contains("--key"));
}
