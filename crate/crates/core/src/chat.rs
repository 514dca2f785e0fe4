//! Chat transcript types and chat-completion clients.
//!
//! [`OpenAiChatClient`] speaks the common `/chat/completions` wire format with
//! function declarations. [`ScriptedChatClient`] replays canned replies for
//! offline runs and tests.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::client::{
    env_var, ClientError, HttpJson, ENV_LLM_API_BASE, ENV_LLM_API_KEY, ENV_LLM_MODEL, ENV_SUMMARIZER_API_BASE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    #[serde(default)]
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub arguments: Value,
}

impl ToolCall {
    pub fn new(name: impl Into<String>, arguments: Value) -> Self {
        Self {
            id: String::new(),
            name: name.into(),
            arguments,
        }
    }
}

/// Content injected alongside a message for the model to inspect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Attachment {
    /// Image content as an `http(s)` or `data:` URL.
    Image { photo_id: String, url: String },
    /// Textual stand-in when no image can be shown.
    Text { photo_id: String, text: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attachments: Vec<Attachment>,
}

impl Message {
    fn plain(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
            tool_calls: Vec::new(),
            tool_call_id: None,
            name: None,
            attachments: Vec::new(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::plain(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::plain(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>, tool_calls: Vec<ToolCall>) -> Self {
        Self {
            tool_calls,
            ..Self::plain(Role::Assistant, content)
        }
    }

    pub fn tool(
        call_id: impl Into<String>,
        name: impl Into<String>,
        content: impl Into<String>,
        attachments: Vec<Attachment>,
    ) -> Self {
        Self {
            tool_call_id: Some(call_id.into()),
            name: Some(name.into()),
            attachments,
            ..Self::plain(Role::Tool, content)
        }
    }
}

/// A function declaration advertised to the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSchema {
    pub name: String,
    pub description: String,
    pub parameters: Value,
}

impl ToolSchema {
    /// `{"type": "function", "function": {...}}` as sent on the wire.
    pub fn to_wire(&self) -> Value {
        json!({
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": self.parameters,
            }
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChatReply {
    #[serde(default)]
    pub content: String,
    #[serde(default)]
    pub tool_calls: Vec<ToolCall>,
}

impl ChatReply {
    pub fn text(content: impl Into<String>) -> Self {
        Self {
            content: content.into(),
            tool_calls: Vec::new(),
        }
    }

    pub fn calls(calls: Vec<ToolCall>) -> Self {
        Self {
            content: String::new(),
            tool_calls: calls,
        }
    }
}

pub trait ChatClient: Send + Sync {
    fn complete(&self, messages: &[Message], tools: &[ToolSchema]) -> Result<ChatReply, ClientError>;

    /// Whether image attachments can be delivered to the model.
    fn supports_images(&self) -> bool {
        false
    }

    fn model_name(&self) -> String {
        "unknown".into()
    }
}

/// Convert a transcript into wire messages.
///
/// Tool messages cannot carry images, so image attachments are moved into a
/// following user message; text attachments are appended to the content.
pub fn to_wire_messages(messages: &[Message], images: bool) -> Vec<Value> {
    let mut out = Vec::with_capacity(messages.len());
    for m in messages {
        let mut content = m.content.clone();
        let mut image_parts = Vec::new();
        for a in &m.attachments {
            match a {
                Attachment::Text { text, .. } => {
                    content.push('\n');
                    content.push_str(text);
                }
                Attachment::Image { photo_id, url } if images => {
                    image_parts.push(json!({"type": "text", "text": format!("Photo {photo_id}:")}));
                    image_parts.push(json!({"type": "image_url", "image_url": {"url": url}}));
                }
                Attachment::Image { photo_id, .. } => {
                    content.push_str(&format!("\n[photo {photo_id}: image not viewable by this model]"));
                }
            }
        }
        let mut msg = json!({ "role": m.role, "content": content });
        if !m.tool_calls.is_empty() {
            msg["tool_calls"] = Value::Array(
                m.tool_calls
                    .iter()
                    .map(|c| {
                        json!({
                            "id": c.id,
                            "type": "function",
                            "function": {"name": c.name, "arguments": c.arguments.to_string()},
                        })
                    })
                    .collect(),
            );
        }
        if let Some(id) = &m.tool_call_id {
            msg["tool_call_id"] = json!(id);
        }
        out.push(msg);
        if !image_parts.is_empty() {
            out.push(json!({"role": "user", "content": image_parts}));
        }
    }
    out
}

/// Parse the first choice of a chat-completion response body.
pub fn parse_wire_reply(body: &Value) -> Result<ChatReply, ClientError> {
    let message = body
        .pointer("/choices/0/message")
        .ok_or_else(|| ClientError::Protocol("response has no choices[0].message".into()))?;
    let content = message
        .get("content")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    let mut tool_calls = Vec::new();
    if let Some(calls) = message.get("tool_calls").and_then(Value::as_array) {
        for call in calls {
            let name = call
                .pointer("/function/name")
                .and_then(Value::as_str)
                .ok_or_else(|| ClientError::Protocol("tool call without function name".into()))?;
            let raw = call.pointer("/function/arguments");
            // unparseable argument strings are kept verbatim so dispatch can report them
            let arguments = match raw {
                Some(Value::String(s)) if s.trim().is_empty() => json!({}),
                Some(Value::String(s)) => serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.clone())),
                Some(v) => v.clone(),
                None => json!({}),
            };
            tool_calls.push(ToolCall {
                id: call.get("id").and_then(Value::as_str).unwrap_or_default().to_string(),
                name: name.to_string(),
                arguments,
            });
        }
    }
    Ok(ChatReply { content, tool_calls })
}

/// Client for OpenAI-compatible chat-completion endpoints.
pub struct OpenAiChatClient {
    http: HttpJson,
    base: String,
    api_key: Option<String>,
    model: String,
    images: bool,
    temperature: Option<f64>,
}

impl OpenAiChatClient {
    pub fn new(
        base: impl Into<String>,
        api_key: Option<String>,
        model: impl Into<String>,
    ) -> Result<Self, ClientError> {
        Ok(Self {
            http: HttpJson::new(Duration::from_secs(300))?,
            base: base.into().trim_end_matches('/').to_string(),
            api_key,
            model: model.into(),
            images: true,
            temperature: None,
        })
    }

    /// From `LLM_API_BASE`, `LLM_API_KEY`, `LLM_MODEL`.
    pub fn from_env() -> Result<Self, ClientError> {
        let base = env_var(ENV_LLM_API_BASE)
            .ok_or_else(|| ClientError::Unconfigured(format!("{ENV_LLM_API_BASE} is not set")))?;
        let model =
            env_var(ENV_LLM_MODEL).ok_or_else(|| ClientError::Unconfigured(format!("{ENV_LLM_MODEL} is not set")))?;
        Self::new(base, env_var(ENV_LLM_API_KEY), model)
    }

    /// Summarizer endpoint: `SUMMARIZER_API_BASE` overrides the base, model from `LLM_MODEL`.
    pub fn summarizer_from_env() -> Result<Self, ClientError> {
        let mut client = Self::from_env();
        if let Some(base) = env_var(ENV_SUMMARIZER_API_BASE) {
            let model = env_var(ENV_LLM_MODEL).unwrap_or_else(|| "default".into());
            client = Self::new(base, env_var(ENV_LLM_API_KEY), model);
        }
        client
    }

    pub fn with_images(mut self, images: bool) -> Self {
        self.images = images;
        self
    }

    /// Leave unset to use the endpoint's default sampling.
    pub fn with_temperature(mut self, temperature: Option<f64>) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn request_body(&self, messages: &[Message], tools: &[ToolSchema]) -> Value {
        let mut body = json!({
            "model": self.model,
            "messages": to_wire_messages(messages, self.images),
        });
        if !tools.is_empty() {
            body["tools"] = Value::Array(tools.iter().map(ToolSchema::to_wire).collect());
        }
        if let Some(t) = self.temperature {
            body["temperature"] = json!(t);
        }
        body
    }
}

impl ChatClient for OpenAiChatClient {
    fn complete(&self, messages: &[Message], tools: &[ToolSchema]) -> Result<ChatReply, ClientError> {
        let mut headers = Vec::new();
        if let Some(key) = &self.api_key {
            headers.push(("Authorization", format!("Bearer {key}")));
        }
        let body = self.request_body(messages, tools);
        let resp: Value = self
            .http
            .post(&format!("{}/chat/completions", self.base), &headers, &body)?;
        parse_wire_reply(&resp)
    }

    fn supports_images(&self) -> bool {
        self.images
    }

    fn model_name(&self) -> String {
        self.model.clone()
    }
}

/// Replays a fixed list of replies, then repeats a fallback reply forever.
pub struct ScriptedChatClient {
    script: Mutex<VecDeque<Result<ChatReply, ClientError>>>,
    fallback: ChatReply,
    images: bool,
    recorded: Mutex<Vec<Vec<Message>>>,
    name: String,
}

impl ScriptedChatClient {
    pub fn new(replies: impl IntoIterator<Item = ChatReply>) -> Self {
        Self::with_results(replies.into_iter().map(Ok))
    }

    /// Script entries may be errors, to exercise retry and failure paths.
    pub fn with_results(replies: impl IntoIterator<Item = Result<ChatReply, ClientError>>) -> Self {
        Self {
            script: Mutex::new(replies.into_iter().collect()),
            fallback: ChatReply::text("I am still investigating."),
            images: false,
            recorded: Mutex::new(Vec::new()),
            name: "scripted".into(),
        }
    }

    /// A client that never produces a final answer.
    pub fn never_answers() -> Self {
        Self::new(Vec::new())
    }

    pub fn with_fallback(mut self, reply: ChatReply) -> Self {
        self.fallback = reply;
        self
    }

    pub fn with_images(mut self, images: bool) -> Self {
        self.images = images;
        self
    }

    /// Every transcript the client was called with, in order.
    pub fn recorded(&self) -> Vec<Vec<Message>> {
        self.recorded.lock().unwrap().clone()
    }
}

impl ChatClient for ScriptedChatClient {
    fn complete(&self, messages: &[Message], _tools: &[ToolSchema]) -> Result<ChatReply, ClientError> {
        self.recorded.lock().unwrap().push(messages.to_vec());
        match self.script.lock().unwrap().pop_front() {
            Some(reply) => reply,
            None => Ok(self.fallback.clone()),
        }
    }

    fn supports_images(&self) -> bool {
        self.images
    }

    fn model_name(&self) -> String {
        self.name.clone()
    }
}
