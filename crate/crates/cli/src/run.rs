//! `agent run`: single queries, query-set benchmarks and built-in fixtures.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;

use seeker::agent::{run_session, Agent, AgentConfig};
use seeker::chat::{ChatClient, ChatReply, OpenAiChatClient, ScriptedChatClient};
use seeker::evalkit::{
    config_digest, em, f1, load_queries, run_benchmark, BenchmarkOptions, EvalError, QueryRecord, QueryType,
    RunMetadata, RunOutcome, VoteRule,
};
use seeker::memory::{ChatSummarizer, FixedSummarizer, Summarizer};
use seeker::synth;
use seeker::toolkit::ToolName;
use seeker::vecindex::Embedder;

use crate::data::{self, EmbedArgs, SourceArgs, UserData, Users};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fixture {
    /// The beach-after-fireworks walkthrough with its scripted replies.
    CaseOne,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Vote {
    PerPhoto,
    SetPlurality,
}

impl From<Vote> for VoteRule {
    fn from(v: Vote) -> Self {
        match v {
            Vote::PerPhoto => VoteRule::PerPhoto,
            Vote::SetPlurality => VoteRule::SetPlurality,
        }
    }
}

#[derive(Args)]
pub struct RunArgs {
    /// One query against the single `--corpus`.
    #[arg(long, conflicts_with_all = ["queries", "fixture"])]
    query: Option<String>,
    /// Queries JSONL for a benchmark run.
    #[arg(long, conflicts_with = "fixture")]
    queries: Option<PathBuf>,
    /// Built-in offline fixture with its own corpus, index and script.
    #[arg(long, value_enum)]
    fixture: Option<Fixture>,
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    embed: EmbedArgs,
    /// JSON array of scripted replies replayed for every session instead of
    /// the live model at LLM_API_BASE.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Extra location aliases (JSONL of {"alias", "canonical"}).
    #[arg(long)]
    aliases: Option<PathBuf>,
    /// Root for relative image references.
    #[arg(long)]
    image_root: Option<PathBuf>,
    #[arg(long, default_value_t = AgentConfig::default().max_turns)]
    max_turns: usize,
    #[arg(long, default_value_t = AgentConfig::default().token_limit)]
    token_limit: usize,
    /// Default result count for ImageSearch.
    #[arg(long, default_value_t = AgentConfig::default().default_top_k)]
    top_k: usize,
    /// Remove a tool from the session (repeatable).
    #[arg(long = "disable-tool", value_parser = parse_tool)]
    disable_tool: Vec<ToolName>,
    /// Hide named subsets (save_as, search_within, filter_within).
    #[arg(long)]
    no_explicit_memory: bool,
    /// Disable context compression and the CompressMemory tool.
    #[arg(long)]
    no_compression: bool,
    /// Concurrent sessions.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Independent sessions per query.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Vote::PerPhoto)]
    vote: Vote,
    /// Directory for the report, resolved config and session traces.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_tool(s: &str) -> Result<ToolName, String> {
    s.parse()
}

/// Resolved configuration; its digest goes into the report. Credentials are
/// never part of it.
#[derive(Serialize)]
struct RunConfig<'a> {
    corpus: &'a [PathBuf],
    embeddings: &'a [PathBuf],
    data_dir: Option<&'a PathBuf>,
    queries: Option<&'a PathBuf>,
    query: Option<&'a str>,
    fixture: Option<Fixture>,
    script: Option<&'a PathBuf>,
    model: &'a str,
    embedder: &'a str,
    agent: &'a AgentConfig,
    parallel: usize,
    repeats: usize,
    seed: u64,
    vote: VoteRule,
}

enum ChatSource {
    Script(Vec<ChatReply>),
    Live(OpenAiChatClient),
}

impl ChatSource {
    fn model(&self) -> String {
        match self {
            ChatSource::Script(_) => "scripted".into(),
            ChatSource::Live(c) => c.model_name(),
        }
    }
}

static STOP: AtomicBool = AtomicBool::new(false);

fn agent_config(args: &RunArgs) -> AgentConfig {
    let mut config = AgentConfig {
        max_turns: args.max_turns,
        token_limit: args.token_limit,
        default_top_k: args.top_k,
        explicit_memory: !args.no_explicit_memory,
        compression: !args.no_compression,
        ..AgentConfig::default()
    };
    for &t in &args.disable_tool {
        config.tools = config.tools.without(t);
    }
    config
}

fn load_script(path: &Path) -> Result<Vec<ChatReply>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn run(args: RunArgs) -> Result<()> {
    let config = agent_config(&args);
    if config.max_turns == 0 {
        bail!("--max-turns must be positive");
    }
    let aliases = data::aliases(args.aliases.as_deref())?;

    let (queries, users, embedder, chat) = match args.fixture {
        Some(Fixture::CaseOne) => {
            let f = synth::case_one();
            let script = synth::case_one_script(&f);
            let query = QueryRecord {
                query_id: "case-one".into(),
                user_id: f.corpus.user_id.clone(),
                text: f.query.clone(),
                query_type: QueryType::InterEvent,
                gold: f.gold.clone(),
            };
            let embedder: (Box<dyn Embedder>, String) = (Box::new(f.embedder), format!("hash-{}", synth::CASE_ONE_DIM));
            let mut users = Users::new();
            users.insert(
                query.user_id.clone(),
                Ok(UserData {
                    corpus: f.corpus,
                    index: f.index,
                }),
            );
            (vec![query], users, Some(embedder), ChatSource::Script(script))
        }
        None => {
            let chat = match &args.script {
                Some(p) => ChatSource::Script(load_script(p)?),
                None => ChatSource::Live(OpenAiChatClient::from_env()?),
            };
            let embedder = args.embed.optional()?;
            if embedder.is_none() {
                log::warn!("no embedder configured: text ImageSearch calls will fail");
            }
            let (queries, users) = match (&args.query, &args.queries) {
                (Some(text), None) => {
                    if args.source.corpus.len() != 1 {
                        bail!("--query needs exactly one --corpus");
                    }
                    let users = args.source.load(std::iter::empty())?;
                    let user = users.keys().next().cloned().unwrap_or_default();
                    let q = QueryRecord {
                        query_id: "query".into(),
                        user_id: user,
                        text: text.clone(),
                        query_type: QueryType::IntraEvent,
                        gold: Vec::new(),
                    };
                    (vec![q], users)
                }
                (None, Some(path)) => {
                    let queries = load_queries(path)?;
                    let wanted: BTreeSet<&str> = queries.iter().map(|q| q.user_id.as_str()).collect();
                    let users = args.source.load(wanted)?;
                    for q in &queries {
                        if let Some(Ok(d)) = users.get(&q.user_id) {
                            q.check_gold(&d.corpus)?;
                        }
                    }
                    (queries, users)
                }
                _ => bail!("pass one of --query, --queries or --fixture"),
            };
            (queries, users, embedder, chat)
        }
    };

    let geocoder = data::geocoder()?;
    let search = data::search_client()?;
    let summarizer: Box<dyn Summarizer> = match &chat {
        ChatSource::Live(_) => Box::new(ChatSummarizer::new(OpenAiChatClient::summarizer_from_env()?)),
        ChatSource::Script(_) => Box::new(FixedSummarizer { bytes: 2048 }),
    };
    let model = chat.model();
    let embedder_name = embedder.as_ref().map_or("none", |e| e.1.as_str()).to_string();
    let run_config = RunConfig {
        corpus: &args.source.corpus,
        embeddings: &args.source.embeddings,
        data_dir: args.source.data_dir.as_ref(),
        queries: args.queries.as_ref(),
        query: args.query.as_deref(),
        fixture: args.fixture,
        script: args.script.as_ref(),
        model: &model,
        embedder: &embedder_name,
        agent: &config,
        parallel: args.parallel,
        repeats: args.repeats,
        seed: args.seed,
        vote: args.vote.into(),
    };
    let options = BenchmarkOptions {
        parallel: args.parallel,
        repeats: args.repeats,
        vote: args.vote.into(),
        metadata: RunMetadata {
            model: model.clone(),
            embedder: embedder_name.clone(),
            config_digest: config_digest(&run_config),
            seed: args.seed,
        },
    };
    let trace_dir = args.out.as_ref().map(|d| d.join("traces"));
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir.join("traces")).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join("run_config.json"), serde_json::to_string_pretty(&run_config)?)?;
    }

    if let Err(e) = ctrlc::set_handler(|| {
        eprintln!("interrupt: finishing running sessions and writing a partial report");
        STOP.store(true, Ordering::SeqCst);
    }) {
        log::warn!("cannot install signal handler: {e}");
    }

    let single = args.query.is_some();
    let last = Mutex::new(None);
    let runner = |q: &QueryRecord, repeat: usize| -> Result<RunOutcome, EvalError> {
        if STOP.load(Ordering::SeqCst) {
            return Err(EvalError::Interrupted(q.query_id.clone()));
        }
        let data = match users.get(&q.user_id) {
            Some(Ok(d)) => d,
            Some(Err(reason)) => {
                return Err(EvalError::Unresolvable {
                    query_id: q.query_id.clone(),
                    reason: reason.clone(),
                })
            }
            None => {
                return Err(EvalError::Unresolvable {
                    query_id: q.query_id.clone(),
                    reason: format!("no corpus for user {}", q.user_id),
                })
            }
        };
        let mut agent = Agent::new(&data.corpus, &data.index, &aliases);
        agent.embedder = embedder.as_ref().map(|e| e.0.as_ref());
        agent.geocoder = geocoder.as_deref();
        agent.search = search.as_deref();
        agent.summarizer = Some(summarizer.as_ref());
        agent.image_root = args.image_root.as_deref();
        let result = match &chat {
            ChatSource::Script(replies) => {
                let client = ScriptedChatClient::new(replies.clone());
                run_session(&q.text, &agent, &config, &client)
            }
            ChatSource::Live(client) => run_session(&q.text, &agent, &config, client),
        };
        if let Some(dir) = &trace_dir {
            let path = dir.join(format!("{}.{repeat}.jsonl", q.query_id));
            fs::write(&path, result.trace_jsonl())?;
        }
        if let Some(err) = &result.error {
            log::warn!("query {} run {repeat}: {err}", q.query_id);
        }
        let outcome = RunOutcome::from(&result);
        if single {
            *last.lock().unwrap() = Some(result);
        }
        Ok(outcome)
    };
    let report = run_benchmark(&queries, &runner, &options)?;

    if single {
        let guard = last.lock().unwrap();
        let r = guard.as_ref().context("session did not run")?;
        println!(
            "status: {:?}, turns: {}, compressions: {}",
            r.status, r.turns, r.compressions
        );
        println!("answer: [{}]", r.predicted.join(", "));
        if !r.dropped_ids.is_empty() {
            println!("dropped unknown ids: {}", r.dropped_ids.join(", "));
        }
        if let Some(dir) = &args.out {
            fs::write(dir.join("result.json"), serde_json::to_string_pretty(r)?)?;
        }
    } else {
        print!("{}", report.render_table());
        if args.fixture.is_some() {
            for row in &report.rows {
                println!(
                    "{}: answer [{}], EM {:.1}, F1 {:.1}",
                    row.query_id,
                    row.predicted.join(", "),
                    100.0 * em(&row.predicted, &row.gold),
                    100.0 * f1(&row.predicted, &row.gold)
                );
            }
        }
        if let Some(dir) = &args.out {
            report.write(dir)?;
        }
    }
    if STOP.load(Ordering::SeqCst) {
        bail!("interrupted; {} queries did not run", report.failed);
    }
    Ok(())
}
