//! `seeker` command-line harness.
//!
//! Service endpoints and keys are read from the environment only:
//! `LLM_API_BASE`, `LLM_API_KEY`, `LLM_MODEL`, `SUMMARIZER_API_BASE`,
//! `EMBED_API_BASE`, `SEARCH_API_KEY`, `GEOCODER_API_KEY`.

mod data;
mod eval;
mod graph;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use seeker::corpus::Corpus;
use seeker::filterdsl::{self, filter_scope, FilterContext};
use seeker::vecindex::EmbeddingIndex;

#[derive(Parser)]
#[command(
    name = "seeker",
    version,
    about = "Photo-collection retrieval agent and benchmark harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate photo manifests and print a summary.
    Ingest {
        /// Manifest JSONL files; the user id is taken from each file name.
        #[arg(long = "manifest", required = true)]
        manifests: Vec<PathBuf>,
    },
    /// Embedding index tools.
    #[command(subcommand)]
    Index(IndexCmd),
    /// Evaluate a filter expression over a corpus.
    Filter {
        #[arg(long)]
        expr: String,
        #[arg(long)]
        corpus: PathBuf,
        /// Extra location aliases (JSONL of {"alias", "canonical"}).
        #[arg(long)]
        aliases: Option<PathBuf>,
        /// Resolve missing addresses through the geocoder configured in the environment.
        #[arg(long)]
        geocode: bool,
    },
    /// Memory graph construction, mining, sampling and serialization.
    #[command(subcommand)]
    Graph(graph::GraphCmd),
    /// Run the retrieval agent.
    #[command(subcommand)]
    Agent(AgentCmd),
    /// Embedding-only retrieval baselines.
    #[command(subcommand)]
    Baseline(BaselineCmd),
    /// Score predictions against gold answers.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Render a saved benchmark report.
    Report {
        #[arg(long)]
        report: PathBuf,
        /// Write the Best@k and majority-vote series as JSON.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum IndexCmd {
    /// Embed every photo (caption, else image) and write an embeddings file.
    Build {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        embed: data::EmbedArgs,
    },
}

#[derive(Subcommand)]
enum AgentCmd {
    /// Answer one query, or benchmark a query set.
    Run(run::RunArgs),
}

#[derive(Subcommand)]
enum BaselineCmd {
    /// Rank each query's corpus by embedding similarity and report MAP/Recall/NDCG.
    Retrieve {
        #[arg(long)]
        queries: PathBuf,
        #[command(flatten)]
        source: data::SourceArgs,
        #[command(flatten)]
        embed: data::EmbedArgs,
        /// Cutoffs, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = seeker::evalkit::DEFAULT_KS.to_vec())]
        ks: Vec<usize>,
        /// Method name shown in the table.
        #[arg(long, default_value = "embedding")]
        method: String,
        /// Write the per-query report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum EvalCmd {
    /// Score a predictions file against a query set.
    Score(eval::ScoreArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Ingest { manifests } => ingest(&manifests),
        Command::Index(IndexCmd::Build { corpus, out, embed }) => index_build(&corpus, &out, &embed),
        Command::Filter {
            expr,
            corpus,
            aliases,
            geocode,
        } => filter(&expr, &corpus, aliases.as_deref(), geocode),
        Command::Graph(cmd) => graph::run(cmd),
        Command::Agent(AgentCmd::Run(args)) => run::run(args),
        Command::Baseline(BaselineCmd::Retrieve {
            queries,
            source,
            embed,
            ks,
            method,
            out,
        }) => eval::baseline(&queries, &source, &embed, &ks, &method, out.as_deref()),
        Command::Eval(EvalCmd::Score(args)) => eval::score(args),
        Command::Report { report, plot } => eval::report(&report, plot.as_deref()),
    }
}

fn ingest(manifests: &[PathBuf]) -> Result<()> {
    let mut failed = 0;
    for path in manifests {
        match Corpus::load_manifest_report(path) {
            Ok(load) => {
                let c = &load.corpus;
                println!(
                    "{}: {} photos in {} photosets, {} warnings",
                    c.user_id,
                    c.len(),
                    c.photosets().count(),
                    load.warnings.len()
                );
                for w in &load.warnings {
                    println!("  warning: {w}");
                }
            }
            Err(e) => {
                failed += 1;
                eprintln!("{}: {e}", path.display());
            }
        }
    }
    if failed > 0 {
        bail!("{failed} of {} manifests failed validation", manifests.len());
    }
    Ok(())
}

fn index_build(corpus: &std::path::Path, out: &std::path::Path, embed: &data::EmbedArgs) -> Result<()> {
    let corpus = Corpus::load_manifest(corpus)?;
    let (embedder, name) = embed.require()?;
    let index = EmbeddingIndex::build_from_captions(&corpus, embedder.as_ref())?;
    std::fs::write(out, index.to_jsonl()).with_context(|| format!("writing {}", out.display()))?;
    let gaps = index.coverage_gaps(&corpus);
    println!(
        "{}: {} of {} photos embedded with {name} (dim {}), {} without caption or image",
        corpus.user_id,
        index.len(),
        corpus.len(),
        index.dim(),
        gaps.len()
    );
    Ok(())
}

fn filter(expr: &str, corpus: &std::path::Path, aliases: Option<&std::path::Path>, geocode: bool) -> Result<()> {
    let corpus = Corpus::load_manifest(corpus)?;
    let aliases = data::aliases(aliases)?;
    let parsed = filterdsl::parse(expr).map_err(|e| anyhow::anyhow!("{}", e))?;
    let geocoder = if geocode { data::geocoder()? } else { None };
    let ctx = FilterContext::new(&aliases, geocoder.as_deref());
    let ids = filter_scope(&corpus, &parsed, None, &ctx);
    println!("count: {}", ids.len());
    for id in ids {
        println!("{id}");
    }
    Ok(())
}
