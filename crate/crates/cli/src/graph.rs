//! `graph` subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Subcommand, ValueEnum};

use seeker::chat::OpenAiChatClient;
use seeker::corpus::Corpus;
use seeker::memgraph::{
    build_graph, check_candidate, load_clue_annotations, load_person_annotations, mine_associations, photo_node_id,
    sample_subgraph, serialize_subgraph, CaptionVerifier, ChatQueryGenerator, ChatVerifier, MemoryGraph, MiningConfig,
    QueryGenerator, Subgraph, Verifier, DEFAULT_EDGE_LIMIT,
};
use seeker::vecindex::EmbeddingIndex;

use crate::data::EmbedArgs;

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum VerifierKind {
    /// Offline check on shared caption words.
    Caption,
    /// Vision-language verifier at LLM_API_BASE.
    Chat,
}

#[derive(Subcommand)]
pub enum GraphCmd {
    /// Build structural edges from clue and person annotations.
    Build {
        #[arg(long)]
        corpus: PathBuf,
        /// JSONL of {"photo_id", "clues": [..]}.
        #[arg(long)]
        clues: PathBuf,
        /// JSONL of {"photo_id", "persons": [..]}.
        #[arg(long)]
        persons: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mine verified clue-to-photo association edges.
    Mine {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Candidates from the clue's own photoset.
        #[arg(long, default_value_t = 5)]
        k_in: usize,
        /// Candidates from other photosets.
        #[arg(long, default_value_t = 5)]
        k_out: usize,
        /// Candidates must score strictly above this similarity.
        #[arg(long, default_value_t = 0.0)]
        floor: f64,
        #[arg(long, value_enum, default_value_t = VerifierKind::Caption)]
        verifier: VerifierKind,
        /// Image root for the chat verifier.
        #[arg(long)]
        image_root: Option<PathBuf>,
        #[command(flatten)]
        embed: EmbedArgs,
    },
    /// Sample a pivot-centred subgraph and print its serialization.
    Sample {
        #[command(flatten)]
        target: SampleTarget,
        /// Write the subgraph (node and edge indices) as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serialize a previously sampled subgraph.
    Serialize {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Subgraph JSON written by `graph sample --out`.
        #[arg(long)]
        subgraph: PathBuf,
    },
    /// Sample a subgraph and ask the model at LLM_API_BASE for candidate queries.
    Synthesize {
        #[command(flatten)]
        target: SampleTarget,
        /// Append accepted candidates to this JSONL file.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
pub struct SampleTarget {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Pivot photo id (with or without the `photo:` prefix).
    #[arg(long)]
    pivot: String,
    /// Maximum number of sampled edges.
    #[arg(long, default_value_t = DEFAULT_EDGE_LIMIT)]
    edges: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SampleTarget {
    fn sample(&self) -> Result<(MemoryGraph, Corpus, Subgraph)> {
        let graph = MemoryGraph::load(&self.graph)?;
        let corpus = Corpus::load_manifest(&self.corpus)?;
        let pivot = if self.pivot.starts_with("photo:") {
            self.pivot.clone()
        } else {
            photo_node_id(&self.pivot)
        };
        let s = sample_subgraph(&graph, &pivot, self.edges, self.seed)?;
        Ok((graph, corpus, s))
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn run(cmd: GraphCmd) -> Result<()> {
    match cmd {
        GraphCmd::Build {
            corpus,
            clues,
            persons,
            out,
        } => {
            let corpus = Corpus::load_manifest(&corpus)?;
            let clues = load_clue_annotations(&clues)?;
            let persons = match persons {
                Some(p) => load_person_annotations(&p)?,
                None => Vec::new(),
            };
            let graph = build_graph(&corpus, &clues, &persons)?;
            write(&out, &graph.to_jsonl())?;
            println!("{} nodes, {} edges", graph.nodes().len(), graph.edges().len());
        }
        GraphCmd::Mine {
            graph,
            corpus,
            embeddings,
            out,
            k_in,
            k_out,
            floor,
            verifier,
            image_root,
            embed,
        } => {
            let mut graph = MemoryGraph::load(&graph)?;
            let corpus = Corpus::load_manifest(&corpus)?;
            let index = EmbeddingIndex::load(&embeddings, &corpus)?;
            let (embedder, _) = embed.require()?;
            let verifier: Box<dyn Verifier> = match verifier {
                VerifierKind::Caption => Box::new(CaptionVerifier),
                VerifierKind::Chat => Box::new(ChatVerifier::new(OpenAiChatClient::from_env()?, image_root)),
            };
            let config = MiningConfig {
                k_in,
                k_out,
                similarity_floor: floor,
            };
            let report = mine_associations(&graph, &corpus, &index, embedder.as_ref(), verifier.as_ref(), &config)?;
            let added = graph.add_associations(&report.edges)?;
            write(&out, &graph.to_jsonl())?;
            println!(
                "{} clues, {} candidates, {} confirmed, {} edges added, {} skipped, {} invalid",
                report.clues, report.candidates, report.confirmed, added, report.skipped, report.invalid
            );
        }
        GraphCmd::Sample { target, out } => {
            let (graph, corpus, s) = target.sample()?;
            print!("{}", serialize_subgraph(&s, &graph, &corpus)?);
            if let Some(out) = out {
                write(&out, &serde_json::to_string_pretty(&s)?)?;
            }
        }
        GraphCmd::Serialize {
            graph,
            corpus,
            subgraph,
        } => {
            let graph = MemoryGraph::load(&graph)?;
            let corpus = Corpus::load_manifest(&corpus)?;
            let text = fs::read_to_string(&subgraph).with_context(|| format!("reading {}", subgraph.display()))?;
            let s: Subgraph = serde_json::from_str(&text)?;
            print!("{}", serialize_subgraph(&s, &graph, &corpus)?);
        }
        GraphCmd::Synthesize { target, out } => {
            let (graph, corpus, s) = target.sample()?;
            let text = serialize_subgraph(&s, &graph, &corpus)?;
            let generator = ChatQueryGenerator::new(OpenAiChatClient::from_env()?);
            let candidates = generator.generate(&text)?;
            let mut lines = String::new();
            let mut rejected = 0;
            for q in &candidates {
                match check_candidate(q, &s) {
                    Ok(()) => lines += &(serde_json::to_string(q)? + "\n"),
                    Err(e) => {
                        rejected += 1;
                        log::warn!("rejected candidate {:?}: {e}", q.text);
                    }
                }
            }
            if candidates.is_empty() {
                bail!("generator returned no candidates");
            }
            let mut existing = fs::read_to_string(&out).unwrap_or_default();
            existing += &lines;
            write(&out, &existing)?;
            println!(
                "{} candidates, {} accepted, {rejected} rejected",
                candidates.len(),
                candidates.len() - rejected
            );
        }
    }
    Ok(())
}
