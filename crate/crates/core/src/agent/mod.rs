//! The tool-calling session loop.
//!
//! A session sends the transcript and tool schemas to a chat client, runs
//! any requested tools in reply order, compresses context when the token
//! budget is exceeded, and stops on a final answer, the turn limit, or an
//! unrecoverable client error.

mod prompt;

use std::collections::HashSet;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::chat::{ChatClient, Message, ToolCall};
use crate::client::with_retries;
use crate::corpus::Corpus;
use crate::filterdsl::AliasTable;
use crate::geocode::Geocoder;
use crate::memory::{CompressionEvent, ContextMemory, Summarizer, DEFAULT_TOKEN_LIMIT};
use crate::toolkit::{
    self, tool_schemas, FilterMetadataArgs, GetMetadataArgs, ImageSearchArgs, SearchClient, SubsetRegistry, ToolEnv,
    ToolError, ToolName, ToolResult, ToolSet, ViewPhotosArgs, WebSearchArgs, DEFAULT_TOP_K,
};
use crate::vecindex::{Embedder, EmbeddingIndex};

pub use prompt::{build_system_prompt, extract_final_answer, ANSWER_FORMAT, ANSWER_PHRASE};

pub const DEFAULT_MAX_TURNS: usize = 30;

const NUDGE: &str = "Continue working with the tools, or give your answer in the form: The final answer is: [photo_id1, photo_id2, ...].";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub max_turns: usize,
    pub token_limit: usize,
    pub default_top_k: usize,
    pub tools: ToolSet,
    pub explicit_memory: bool,
    pub compression: bool,
    pub retry_attempts: u32,
    pub retry_base_delay_ms: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            max_turns: DEFAULT_MAX_TURNS,
            token_limit: DEFAULT_TOKEN_LIMIT,
            default_top_k: DEFAULT_TOP_K,
            tools: ToolSet::all(),
            explicit_memory: true,
            compression: true,
            retry_attempts: 3,
            retry_base_delay_ms: 500,
        }
    }
}

impl AgentConfig {
    /// Enabled tools after applying the compression toggle.
    pub fn effective_tools(&self) -> ToolSet {
        if self.compression {
            self.tools.clone()
        } else {
            self.tools.clone().without(ToolName::CompressMemory)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Answered,
    TurnLimit,
    ClientError,
}

/// One line of the session trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub turn: usize,
    pub role: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub args: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result_digest: Option<String>,
    pub tokens: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub turn: usize,
    pub call: ToolCall,
    pub result: ToolResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub predicted: Vec<String>,
    pub status: SessionStatus,
    pub turns: usize,
    pub calls: Vec<CallRecord>,
    pub trace: Vec<TraceEvent>,
    pub dropped_ids: Vec<String>,
    pub registry: SubsetRegistry,
    pub compressions: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SessionResult {
    pub fn trace_jsonl(&self) -> String {
        self.trace
            .iter()
            .map(|e| serde_json::to_string(e).expect("trace event serializes") + "\n")
            .collect()
    }
}

/// Read-only resources and auxiliary clients shared by sessions.
#[derive(Clone, Copy)]
pub struct Agent<'a> {
    pub corpus: &'a Corpus,
    pub index: &'a EmbeddingIndex,
    pub aliases: &'a AliasTable,
    pub embedder: Option<&'a dyn Embedder>,
    pub geocoder: Option<&'a dyn Geocoder>,
    pub search: Option<&'a dyn SearchClient>,
    pub summarizer: Option<&'a dyn Summarizer>,
    pub image_root: Option<&'a Path>,
}

impl<'a> Agent<'a> {
    pub fn new(corpus: &'a Corpus, index: &'a EmbeddingIndex, aliases: &'a AliasTable) -> Self {
        Self {
            corpus,
            index,
            aliases,
            embedder: None,
            geocoder: None,
            search: None,
            summarizer: None,
            image_root: None,
        }
    }

    fn tool_env(&self, config: &AgentConfig, images: bool) -> ToolEnv<'a> {
        ToolEnv {
            corpus: self.corpus,
            index: self.index,
            embedder: self.embedder,
            aliases: self.aliases,
            geocoder: self.geocoder,
            search: self.search,
            image_root: self.image_root,
            images,
            explicit_memory: config.explicit_memory,
            default_top_k: config.default_top_k,
        }
    }
}

/// Mutable state of one running session.
pub struct Session {
    pub memory: ContextMemory,
    pub registry: SubsetRegistry,
    pub turn: usize,
    pub calls: Vec<CallRecord>,
    pub trace: Vec<TraceEvent>,
    pub compressions: usize,
    /// Set once the assistant message that issued the pending calls was
    /// compressed away; later results are then delivered as user messages.
    detached: bool,
}

impl Session {
    pub fn new(system_prompt: String, query: &str, token_limit: usize) -> Self {
        let memory = ContextMemory::new(Message::system(system_prompt), Message::user(query), token_limit);
        let mut s = Self {
            memory,
            registry: SubsetRegistry::new(),
            turn: 0,
            calls: Vec::new(),
            trace: Vec::new(),
            compressions: 0,
            detached: false,
        };
        s.event("system", None);
        s.event("user", None);
        s
    }

    fn event(&mut self, role: &str, note: Option<String>) {
        self.trace.push(TraceEvent {
            turn: self.turn,
            role: role.into(),
            tool: None,
            args: None,
            result_digest: None,
            tokens: self.memory.budget().current,
            note,
        });
    }

    fn record_compression(&mut self, ev: &CompressionEvent, reason: &str) {
        self.compressions += 1;
        self.detached = true;
        self.event(
            "memory",
            Some(format!(
                "{reason} compression: {} -> {} tokens",
                ev.tokens_before, ev.tokens_after
            )),
        );
    }

    fn auto_compress(&mut self, summarizer: &dyn Summarizer) {
        match self.memory.compress(summarizer) {
            Ok(ev) => self.record_compression(&ev, "automatic"),
            Err(e) => {
                log::warn!("automatic compression failed: {e}");
                self.event("memory", Some(format!("automatic compression failed: {e}")));
            }
        }
    }
}

fn execute(
    call: &ToolCall,
    session: &mut Session,
    agent: &Agent<'_>,
    config: &AgentConfig,
    env: &ToolEnv<'_>,
) -> Result<toolkit::ToolOutput, ToolError> {
    let tool = match call.name.parse::<ToolName>() {
        Ok(t) if config.effective_tools().contains(t) => t,
        _ => return Err(ToolError::InvalidArgs(format!("unknown tool {}", call.name))),
    };
    let a = &call.arguments;
    match tool {
        ToolName::ImageSearch => {
            let args = ImageSearchArgs::from_json(a, config.explicit_memory)?;
            toolkit::tool_image_search(env, &mut session.registry, &args)
        }
        ToolName::GetMetadata => toolkit::tool_get_metadata(env, &GetMetadataArgs::from_json(a)?),
        ToolName::FilterMetadata => {
            let args = FilterMetadataArgs::from_json(a, config.explicit_memory)?;
            toolkit::tool_filter_metadata(env, &mut session.registry, &args)
        }
        ToolName::ViewPhotos => toolkit::tool_view_photos(env, &ViewPhotosArgs::from_json(a)?),
        ToolName::WebSearch => toolkit::tool_web_search(env, &WebSearchArgs::from_json(a)?),
        ToolName::CompressMemory => {
            let (out, ev) = toolkit::compress_memory(&mut session.memory, agent.summarizer)?;
            session.record_compression(&ev, "manual");
            Ok(out)
        }
    }
}

/// Run one tool call and append its result to the transcript and trace.
pub fn dispatch_tool_call(
    call: &ToolCall,
    session: &mut Session,
    agent: &Agent<'_>,
    config: &AgentConfig,
    images: bool,
) -> ToolResult {
    let env = agent.tool_env(config, images);
    let result: ToolResult = match execute(call, session, agent, config, &env) {
        // unknown tools are reported without the "invalid arguments" prefix
        Err(ToolError::InvalidArgs(m)) if m.starts_with("unknown tool ") => ToolResult::error(m),
        other => other.into(),
    };
    let message = if session.detached {
        let mut m = Message::user(format!("[{} result]\n{}", call.name, result.text));
        m.attachments = result.attachments.clone();
        m
    } else {
        Message::tool(&call.id, &call.name, &result.text, result.attachments.clone())
    };
    session.memory.push(message);
    session.trace.push(TraceEvent {
        turn: session.turn,
        role: "tool".into(),
        tool: Some(call.name.clone()),
        args: Some(call.arguments.clone()),
        result_digest: Some(result.digest()),
        tokens: session.memory.budget().current,
        note: (!result.ok).then(|| result.text.clone()),
    });
    session.calls.push(CallRecord {
        turn: session.turn,
        call: call.clone(),
        result: result.clone(),
    });
    result
}

fn finish(
    session: Session,
    status: SessionStatus,
    predicted: Vec<String>,
    dropped: Vec<String>,
    error: Option<String>,
) -> SessionResult {
    SessionResult {
        predicted,
        status,
        turns: session.turn,
        calls: session.calls,
        trace: session.trace,
        dropped_ids: dropped,
        registry: session.registry,
        compressions: session.compressions,
        error,
    }
}

/// Run a fresh session for `query` against `chat`.
pub fn run_session(query: &str, agent: &Agent<'_>, config: &AgentConfig, chat: &dyn ChatClient) -> SessionResult {
    let max_turns = config.max_turns.max(1);
    let schemas = tool_schemas(&config.effective_tools(), config.explicit_memory);
    let images = chat.supports_images();
    let mut session = Session::new(build_system_prompt(config), query, config.token_limit);
    let delay = Duration::from_millis(config.retry_base_delay_ms);

    for turn in 1..=max_turns {
        session.turn = turn;
        let reply = match with_retries(config.retry_attempts, delay, || {
            chat.complete(session.memory.transcript(), &schemas)
        }) {
            Ok(r) => r,
            Err(e) => {
                log::error!("chat client failed on turn {turn}: {e}");
                session.event("assistant", Some(format!("client error: {e}")));
                return finish(
                    session,
                    SessionStatus::ClientError,
                    Vec::new(),
                    Vec::new(),
                    Some(e.to_string()),
                );
            }
        };
        let calls: Vec<ToolCall> = reply
            .tool_calls
            .into_iter()
            .enumerate()
            .map(|(i, mut c)| {
                if c.id.is_empty() {
                    c.id = format!("call_{turn}_{i}");
                }
                c
            })
            .collect();
        session.detached = false;
        session
            .memory
            .push(Message::assistant(reply.content.clone(), calls.clone()));
        session.event("assistant", None);

        for call in &calls {
            dispatch_tool_call(call, &mut session, agent, config, images);
        }

        if let Some(ids) = extract_final_answer(&reply.content) {
            let mut seen = HashSet::new();
            let mut predicted = Vec::new();
            let mut dropped = Vec::new();
            for id in ids {
                if !agent.corpus.contains(&id) {
                    dropped.push(id);
                } else if seen.insert(id.clone()) {
                    predicted.push(id);
                }
            }
            if !dropped.is_empty() {
                log::warn!("dropping unknown ids from the final answer: {dropped:?}");
                session.event("answer", Some(format!("dropped unknown ids: {}", dropped.join(", "))));
            }
            return finish(session, SessionStatus::Answered, predicted, dropped, None);
        }
        if calls.is_empty() {
            session.memory.push(Message::user(NUDGE));
            session.event("user", Some("nudge".into()));
        }
        if config.compression && session.memory.should_compress() {
            match agent.summarizer {
                Some(s) => session.auto_compress(s),
                None => session.event("memory", Some("over budget but no summarizer is configured".into())),
            }
        }
    }
    finish(session, SessionStatus::TurnLimit, Vec::new(), Vec::new(), None)
}
