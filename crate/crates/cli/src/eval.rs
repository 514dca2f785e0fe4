//! `baseline retrieve`, `eval score` and `report`.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;

use seeker::evalkit::{
    baseline_retrieve, load_predictions, load_queries, score_predictions, BenchmarkReport, QueryRecord,
    RetrievalReport, RetrievalRow, RunMetadata,
};

use crate::data::{EmbedArgs, SourceArgs};

#[derive(Args)]
pub struct ScoreArgs {
    #[arg(long)]
    queries: PathBuf,
    /// JSONL of {"query_id", "predicted": [ids]}.
    #[arg(long)]
    predictions: PathBuf,
    /// Directory for report.json and report.txt.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Method name shown in the table.
    #[arg(long, default_value = "")]
    method: String,
}

pub fn baseline(
    queries: &Path,
    source: &SourceArgs,
    embed: &EmbedArgs,
    ks: &[usize],
    method: &str,
    out: Option<&Path>,
) -> Result<()> {
    if ks.is_empty() || ks.contains(&0) {
        bail!("--ks must list positive cutoffs");
    }
    let queries = load_queries(queries)?;
    let users: BTreeSet<&str> = queries.iter().map(|q| q.user_id.as_str()).collect();
    let loaded = source.load(users.iter().copied())?;
    let (embedder, _) = embed.require()?;
    let mut rows: Vec<RetrievalRow> = Vec::new();
    for (user, data) in &loaded {
        let mine: Vec<QueryRecord> = queries.iter().filter(|q| &q.user_id == user).cloned().collect();
        if mine.is_empty() {
            continue;
        }
        match data {
            Ok(d) => rows.extend(baseline_retrieve(&mine, &d.index, embedder.as_ref(), ks)?.rows),
            Err(reason) => rows.extend(mine.iter().map(|q| RetrievalRow {
                query_id: q.query_id.clone(),
                ranking: Vec::new(),
                scores: Default::default(),
                failed: Some(reason.clone()),
            })),
        }
    }
    rows.sort_by(|a, b| a.query_id.cmp(&b.query_id));
    let report = RetrievalReport::from_rows(ks, rows);
    print!("{}", report.render_table(method));
    if let Some(out) = out {
        fs::write(out, serde_json::to_string_pretty(&report)?).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

pub fn score(args: ScoreArgs) -> Result<()> {
    let queries = load_queries(&args.queries)?;
    let predictions = load_predictions(&args.predictions)?;
    let metadata = RunMetadata {
        model: args.method,
        ..Default::default()
    };
    let report = score_predictions(&queries, &predictions, metadata)?;
    print!("{}", report.render_table());
    if let Some(dir) = args.out {
        report.write(&dir)?;
    }
    Ok(())
}

pub fn report(path: &Path, plot: Option<&Path>) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let report: BenchmarkReport = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    print!("{}", report.render_table());
    if let Some(plot) = plot {
        let series = serde_json::to_string_pretty(&report.plot_series())?;
        fs::write(plot, series).with_context(|| format!("writing {}", plot.display()))?;
    }
    Ok(())
}
