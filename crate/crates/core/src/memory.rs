//! Token budgeting and compressed context memory.
//!
//! When the transcript grows past the budget, everything between the system
//! prompt and the user query is replaced by one structured summary message
//! with a session section (goals, findings) and a working section (subgoal,
//! plans).

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::chat::{Attachment, ChatClient, Message, Role};
use crate::client::ClientError;

pub const DEFAULT_TOKEN_LIMIT: usize = 131_072;
pub const PER_MESSAGE_OVERHEAD: usize = 8;
/// Flat charge for one image attachment, independent of its encoded size.
pub const IMAGE_ATTACHMENT_TOKENS: usize = 765;

pub const SESSION_HEADER: &str = "SESSION MEMORY:";
pub const WORKING_HEADER: &str = "WORKING MEMORY:";

pub trait TokenCounter: Send + Sync {
    fn count(&self, messages: &[Message]) -> usize;
}

/// `ceil(bytes / 4) + 8` per message, plus a flat charge per image.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicCounter;

impl HeuristicCounter {
    fn message_bytes(m: &Message) -> (usize, usize) {
        let mut bytes = m.content.len();
        let mut images = 0;
        for call in &m.tool_calls {
            bytes += call.name.len() + call.arguments.to_string().len();
        }
        for a in &m.attachments {
            match a {
                Attachment::Text { text, .. } => bytes += text.len(),
                Attachment::Image { .. } => images += 1,
            }
        }
        (bytes, images)
    }
}

impl TokenCounter for HeuristicCounter {
    fn count(&self, messages: &[Message]) -> usize {
        let mut bytes = 0;
        let mut images = 0;
        for m in messages {
            let (b, i) = Self::message_bytes(m);
            bytes += b;
            images += i;
        }
        bytes.div_ceil(4) + PER_MESSAGE_OVERHEAD * messages.len() + IMAGE_ATTACHMENT_TOKENS * images
    }
}

pub fn count_tokens(messages: &[Message]) -> usize {
    HeuristicCounter.count(messages)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenBudget {
    pub limit: usize,
    pub current: usize,
}

impl TokenBudget {
    pub fn new(limit: usize) -> Self {
        Self { limit, current: 0 }
    }
}

impl Default for TokenBudget {
    fn default() -> Self {
        Self::new(DEFAULT_TOKEN_LIMIT)
    }
}

pub fn should_compress(budget: &TokenBudget) -> bool {
    budget.current > budget.limit
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionMemory {
    pub goals: String,
    pub key_findings: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkingMemory {
    pub current_subgoal: String,
    pub plans: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemorySummary {
    pub session: SessionMemory,
    pub working: WorkingMemory,
}

impl MemorySummary {
    pub fn is_complete(&self) -> bool {
        [
            &self.session.goals,
            &self.session.key_findings,
            &self.working.current_subgoal,
            &self.working.plans,
        ]
        .iter()
        .all(|s| !s.trim().is_empty())
    }

    pub fn render(&self) -> String {
        format!(
            "{SESSION_HEADER}\nGoals: {}\nKey findings: {}\n\n{WORKING_HEADER}\nCurrent subgoal: {}\nPlans: {}",
            self.session.goals.trim(),
            self.session.key_findings.trim(),
            self.working.current_subgoal.trim(),
            self.working.plans.trim(),
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MemoryError {
    #[error("summarizer unavailable: {0}")]
    Unconfigured(String),
    #[error("summarizer failed: {0}")]
    Summarizer(#[from] ClientError),
    #[error("summarizer returned an incomplete summary: {0}")]
    Incomplete(String),
}

pub trait Summarizer: Send + Sync {
    fn summarize(&self, span: &[Message]) -> Result<MemorySummary, MemoryError>;
}

/// Plain-text rendering of a transcript span, as sent to a summarizer.
pub fn render_span(span: &[Message]) -> String {
    let mut out = String::new();
    for m in span {
        let role = match m.role {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
            Role::Tool => "tool",
        };
        out.push_str(&format!("[{role}"));
        if let Some(name) = &m.name {
            out.push_str(&format!(" {name}"));
        }
        out.push_str("] ");
        out.push_str(&m.content);
        for call in &m.tool_calls {
            out.push_str(&format!("\n  -> {}({})", call.name, call.arguments));
        }
        for a in &m.attachments {
            match a {
                Attachment::Text { text, .. } => out.push_str(&format!("\n  {text}")),
                Attachment::Image { photo_id, .. } => out.push_str(&format!("\n  <image of {photo_id}>")),
            }
        }
        out.push('\n');
    }
    out
}

const SUMMARIZER_PROMPT: &str = "You compress the interaction history of a photo retrieval agent. \
Read the history and reply with a single JSON object with string fields \
\"goals\" (the high-level retrieval goal), \"key_findings\" (confirmed facts, photo ids, dates, places and saved subset names), \
\"current_subgoal\" (what the agent was doing last) and \"plans\" (next steps). Keep every photo id and subset name that may still matter.";

/// Summarizer backed by any chat-completion client.
pub struct ChatSummarizer<C> {
    client: C,
}

impl<C: ChatClient> ChatSummarizer<C> {
    pub fn new(client: C) -> Self {
        Self { client }
    }
}

/// Extract a summary from model output: a JSON object if present, else labeled lines.
pub fn parse_summary(text: &str) -> Option<MemorySummary> {
    let field = |v: &Value, k: &str| -> String {
        match v.get(k) {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Null) | None => String::new(),
            Some(other) => other.to_string(),
        }
    };
    if let (Some(start), Some(end)) = (text.find('{'), text.rfind('}')) {
        if start < end {
            if let Ok(v) = serde_json::from_str::<Value>(&text[start..=end]) {
                let summary = MemorySummary {
                    session: SessionMemory {
                        goals: field(&v, "goals"),
                        key_findings: field(&v, "key_findings"),
                    },
                    working: WorkingMemory {
                        current_subgoal: field(&v, "current_subgoal"),
                        plans: field(&v, "plans"),
                    },
                };
                return Some(summary);
            }
        }
    }
    let labeled = |label: &str| -> String {
        text.lines()
            .map(str::trim)
            .find_map(|l| {
                l.get(..label.len())
                    .filter(|head| head.eq_ignore_ascii_case(label))
                    .map(|_| l[label.len()..].trim().to_string())
            })
            .unwrap_or_default()
    };
    let summary = MemorySummary {
        session: SessionMemory {
            goals: labeled("Goals:"),
            key_findings: labeled("Key findings:"),
        },
        working: WorkingMemory {
            current_subgoal: labeled("Current subgoal:"),
            plans: labeled("Plans:"),
        },
    };
    summary.is_complete().then_some(summary)
}

impl<C: ChatClient> Summarizer for ChatSummarizer<C> {
    fn summarize(&self, span: &[Message]) -> Result<MemorySummary, MemoryError> {
        let messages = [Message::system(SUMMARIZER_PROMPT), Message::user(render_span(span))];
        let reply = self.client.complete(&messages, &[])?;
        parse_summary(&reply.content)
            .filter(MemorySummary::is_complete)
            .ok_or(MemoryError::Incomplete(reply.content))
    }
}

/// Deterministic summarizer whose rendered fields total roughly `bytes` bytes.
#[derive(Debug, Clone)]
pub struct FixedSummarizer {
    pub bytes: usize,
}

impl Summarizer for FixedSummarizer {
    fn summarize(&self, span: &[Message]) -> Result<MemorySummary, MemoryError> {
        let quarter = (self.bytes / 4).max(1);
        let fill = |label: &str| {
            let mut s = format!("{label} ({} messages)", span.len());
            while s.len() < quarter {
                s.push('.');
            }
            s.truncate(quarter.max(label.len()));
            s
        };
        Ok(MemorySummary {
            session: SessionMemory {
                goals: fill("goal"),
                key_findings: fill("findings"),
            },
            working: WorkingMemory {
                current_subgoal: fill("subgoal"),
                plans: fill("plans"),
            },
        })
    }
}

/// Always fails with a transport error.
#[derive(Debug, Clone, Default)]
pub struct FailingSummarizer;

impl Summarizer for FailingSummarizer {
    fn summarize(&self, _span: &[Message]) -> Result<MemorySummary, MemoryError> {
        Err(MemoryError::Summarizer(ClientError::Transport(
            "summarizer unreachable".into(),
        )))
    }
}

/// Outcome of one successful compression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionEvent {
    pub tokens_before: usize,
    pub tokens_after: usize,
    pub removed_messages: usize,
    pub summary: MemorySummary,
}

/// Compress `transcript`, keeping `system` and `query` verbatim.
///
/// The removable span is everything except the first occurrence of each
/// preserved message.
pub fn compress(
    transcript: &[Message],
    summarizer: &dyn Summarizer,
    system: &Message,
    query: &Message,
) -> Result<(MemorySummary, Vec<Message>), MemoryError> {
    let sys_at = transcript.iter().position(|m| m == system);
    let query_at = transcript
        .iter()
        .enumerate()
        .position(|(i, m)| Some(i) != sys_at && m == query);
    let span: Vec<Message> = transcript
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != sys_at && Some(*i) != query_at)
        .map(|(_, m)| m.clone())
        .collect();
    let summary = summarizer.summarize(&span)?;
    if !summary.is_complete() {
        return Err(MemoryError::Incomplete(summary.render()));
    }
    let rebuilt = vec![system.clone(), Message::user(summary.render()), query.clone()];
    Ok((summary, rebuilt))
}

/// A session transcript with its budget and preserved anchor messages.
pub struct ContextMemory {
    transcript: Vec<Message>,
    system: Message,
    query: Message,
    budget: TokenBudget,
    counter: Arc<dyn TokenCounter>,
    last_summary: Option<MemorySummary>,
}

impl ContextMemory {
    pub fn new(system: Message, query: Message, limit: usize) -> Self {
        Self::with_counter(system, query, limit, Arc::new(HeuristicCounter))
    }

    pub fn with_counter(system: Message, query: Message, limit: usize, counter: Arc<dyn TokenCounter>) -> Self {
        let mut mem = Self {
            transcript: vec![system.clone(), query.clone()],
            system,
            query,
            budget: TokenBudget::new(limit),
            counter,
            last_summary: None,
        };
        mem.recount();
        mem
    }

    fn recount(&mut self) {
        self.budget.current = self.counter.count(&self.transcript);
    }

    pub fn transcript(&self) -> &[Message] {
        &self.transcript
    }

    pub fn budget(&self) -> TokenBudget {
        self.budget
    }

    pub fn last_summary(&self) -> Option<&MemorySummary> {
        self.last_summary.as_ref()
    }

    pub fn push(&mut self, message: Message) {
        self.transcript.push(message);
        self.recount();
    }

    pub fn should_compress(&self) -> bool {
        should_compress(&self.budget)
    }

    /// On failure the transcript is left exactly as it was.
    pub fn compress(&mut self, summarizer: &dyn Summarizer) -> Result<CompressionEvent, MemoryError> {
        let before = self.budget.current;
        let (summary, rebuilt) = compress(&self.transcript, summarizer, &self.system, &self.query)?;
        let removed = self.transcript.len() + 1 - rebuilt.len();
        self.transcript = rebuilt;
        self.recount();
        self.last_summary = Some(summary.clone());
        Ok(CompressionEvent {
            tokens_before: before,
            tokens_after: self.budget.current,
            removed_messages: removed,
            summary,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chat::{ChatReply, ScriptedChatClient, ToolCall};
    use serde_json::json;

    struct FivePer;
    impl TokenCounter for FivePer {
        fn count(&self, m: &[Message]) -> usize {
            5 * m.len()
        }
    }

    #[test]
    fn heuristic_counts() {
        assert_eq!(count_tokens(&[Message::user("abcd")]), 9);
        assert_eq!(
            count_tokens(&[Message::user("12345678"), Message::user("abcdefgh")]),
            20
        );
        assert_eq!(count_tokens(&[Message::user("abcde")]), 2 + 8);
        assert_eq!(count_tokens(&[]), 0);
        let m = [Message::user("a"), Message::user("b"), Message::user("c")];
        assert_eq!(FivePer.count(&m), 15);
    }

    #[test]
    fn images_and_calls_are_charged() {
        let call = Message::assistant("", vec![ToolCall::new("ab", json!({}))]);
        // "ab" + "{}" = 4 bytes
        assert_eq!(count_tokens(&[call]), 1 + 8);
        let img = Message::tool(
            "c",
            "ViewPhotos",
            "",
            vec![Attachment::Image {
                photo_id: "p".into(),
                url: "x".repeat(10_000),
            }],
        );
        assert_eq!(count_tokens(&[img]), 8 + IMAGE_ATTACHMENT_TOKENS);
    }

    #[test]
    fn strict_trigger() {
        assert!(should_compress(&TokenBudget {
            limit: 131_072,
            current: 131_073
        }));
        assert!(!should_compress(&TokenBudget {
            limit: 131_072,
            current: 131_072
        }));
    }

    fn filled(n: usize) -> ContextMemory {
        let mut mem = ContextMemory::new(Message::system("sys"), Message::user("find photos"), 1000);
        for i in 0..n {
            mem.push(Message::assistant(
                format!("thinking step {i} {}", "x".repeat(100)),
                vec![],
            ));
            mem.push(Message::tool(
                format!("c{i}"),
                "FilterMetadata",
                "y".repeat(100),
                vec![],
            ));
        }
        mem
    }

    #[test]
    fn compress_rebuilds_three_messages() {
        let mut mem = filled(40);
        assert!(mem.should_compress());
        let event = mem.compress(&FixedSummarizer { bytes: 300 }).unwrap();
        let t = mem.transcript();
        assert_eq!(t.len(), 3);
        assert_eq!(t[0], Message::system("sys"));
        assert_eq!(t[2], Message::user("find photos"));
        assert!(t[1].content.contains(SESSION_HEADER) && t[1].content.contains(WORKING_HEADER));
        assert!(event.tokens_after < event.tokens_before);
        assert_eq!(event.removed_messages, 80);

        // fixed point: compressing again keeps the shape
        mem.compress(&FixedSummarizer { bytes: 300 }).unwrap();
        assert_eq!(mem.transcript().len(), 3);
        assert_eq!(mem.transcript()[2], Message::user("find photos"));
    }

    #[test]
    fn failure_leaves_transcript_untouched() {
        let mut mem = filled(5);
        let before = serde_json::to_string(mem.transcript()).unwrap();
        assert!(mem.compress(&FailingSummarizer).is_err());
        assert_eq!(serde_json::to_string(mem.transcript()).unwrap(), before);
    }

    #[test]
    fn chat_summarizer_parses_json_and_rejects_empty() {
        let client = ScriptedChatClient::new([ChatReply::text(
            "Here: {\"goals\": \"g\", \"key_findings\": \"f\", \"current_subgoal\": \"s\", \"plans\": \"p\"}",
        )]);
        let s = ChatSummarizer::new(client).summarize(&[]).unwrap();
        assert_eq!(s.working.plans, "p");

        let client = ScriptedChatClient::new([ChatReply::text("{\"goals\": \"\"}")]);
        assert!(matches!(
            ChatSummarizer::new(client).summarize(&[]),
            Err(MemoryError::Incomplete(_))
        ));
    }

    #[test]
    fn labeled_summary_fallback() {
        let text = "Goals: find beach\nKey findings: jul_31 saved\nCurrent subgoal: inspect\nPlans: view photos";
        let s = parse_summary(text).unwrap();
        assert_eq!(s.session.key_findings, "jul_31 saved");
        assert!(parse_summary("nothing useful").is_none());
    }
}
