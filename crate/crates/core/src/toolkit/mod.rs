//! The agent-facing tools and the named-subset registry.
//!
//! Tool failures are values: every call yields a [`ToolResult`], and an
//! error leaves the registry exactly as it was.

mod args;
mod registry;
mod schema;
mod tools;
mod websearch;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chat::Attachment;
use crate::client::ClientError;
use crate::corpus::{Corpus, CorpusError};
use crate::filterdsl::{AliasTable, SyntaxError};
use crate::geocode::Geocoder;
use crate::memory::MemoryError;
use crate::vecindex::{Embedder, EmbeddingIndex, IndexError};

pub use args::{FilterMetadataArgs, GetMetadataArgs, ImageSearchArgs, ViewPhotosArgs, WebSearchArgs};
pub use registry::{resolve_subset, RegistryEvent, SubsetRegistry};
pub use schema::tool_schemas;
pub use tools::{
    compress_memory, resolve_image, tool_filter_metadata, tool_get_metadata, tool_image_search, tool_view_photos,
    tool_web_search, VIEW_LIMIT,
};
pub use websearch::{parse_serper, SearchClient, SerperClient, StaticSearchClient, WebResult};

pub const DEFAULT_TOP_K: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ToolName {
    ImageSearch,
    GetMetadata,
    FilterMetadata,
    ViewPhotos,
    WebSearch,
    CompressMemory,
}

impl ToolName {
    pub const ALL: [ToolName; 6] = [
        ToolName::ImageSearch,
        ToolName::GetMetadata,
        ToolName::FilterMetadata,
        ToolName::ViewPhotos,
        ToolName::WebSearch,
        ToolName::CompressMemory,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ToolName::ImageSearch => "ImageSearch",
            ToolName::GetMetadata => "GetMetadata",
            ToolName::FilterMetadata => "FilterMetadata",
            ToolName::ViewPhotos => "ViewPhotos",
            ToolName::WebSearch => "WebSearch",
            ToolName::CompressMemory => "CompressMemory",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ToolName::ImageSearch => {
                "Multimodal similarity search over the photo collection. Query with text, with reference photos, or both; returns photo IDs ranked by similarity score."
            }
            ToolName::GetMetadata => {
                "Retrieve structured metadata (time, address) for specified photos."
            }
            ToolName::FilterMetadata => {
                "Filter photos by metadata constraints using boolean expressions over time.year, time.month, time.day, time.hour, time.minute, time.weekday (0 = Monday), time.date (\"YYYY-MM-DD\"), time.iso and match_address(address, \"place\"), combined with and, or, not and parentheses."
            }
            ToolName::ViewPhotos => {
                "Inject photos into your visual context for direct inspection (at most 20 photo IDs per call)."
            }
            ToolName::WebSearch => {
                "External web search to resolve entities such as events, venues or landmarks; returns rank, title, snippet and URL."
            }
            ToolName::CompressMemory => {
                "Compress the interaction history into a structured summary of goals, findings, current subgoal and plans, freeing context space."
            }
        }
    }
}

impl fmt::Display for ToolName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ToolName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ToolName::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown tool {s}"))
    }
}

/// The set of tools a session advertises and accepts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSet(BTreeSet<ToolName>);

impl ToolSet {
    pub fn all() -> Self {
        Self(ToolName::ALL.into_iter().collect())
    }

    pub fn none() -> Self {
        Self(BTreeSet::new())
    }

    pub fn without(mut self, tool: ToolName) -> Self {
        self.0.remove(&tool);
        self
    }

    pub fn with(mut self, tool: ToolName) -> Self {
        self.0.insert(tool);
        self
    }

    pub fn contains(&self, tool: ToolName) -> bool {
        self.0.contains(&tool)
    }

    pub fn iter(&self) -> impl Iterator<Item = ToolName> + '_ {
        self.0.iter().copied()
    }
}

impl Default for ToolSet {
    fn default() -> Self {
        Self::all()
    }
}

#[derive(Debug, Error)]
pub enum ToolError {
    #[error("invalid arguments: {0}")]
    InvalidArgs(String),
    #[error("explicit memory is disabled; `{0}` is not available")]
    MemoryDisabled(&'static str),
    #[error("unknown subset {0:?}")]
    UnknownSubset(String),
    #[error("unknown photo id {0:?}")]
    UnknownPhoto(String),
    #[error("at most {VIEW_LIMIT} photo IDs per call")]
    TooManyPhotos,
    #[error("fields must be non-empty subset of {{time, address}}")]
    BadFields,
    #[error("{0}")]
    Syntax(String),
    #[error("{0}")]
    Search(String),
    #[error("{0} is unavailable: {1}")]
    Unavailable(&'static str, String),
    #[error("{0}")]
    Client(#[from] ClientError),
    #[error("{0}")]
    Memory(#[from] MemoryError),
}

impl From<CorpusError> for ToolError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::UnknownPhoto(id) => ToolError::UnknownPhoto(id),
            other => ToolError::InvalidArgs(other.to_string()),
        }
    }
}

impl From<IndexError> for ToolError {
    fn from(e: IndexError) -> Self {
        match e {
            IndexError::UnknownReference(id) => ToolError::UnknownPhoto(id),
            other => ToolError::Search(other.to_string()),
        }
    }
}

impl ToolError {
    pub fn syntax(expression: &str, e: &SyntaxError) -> Self {
        let caret = " ".repeat(expression[..e.offset.min(expression.len())].chars().count());
        ToolError::Syntax(format!("{e}\n  {expression}\n  {caret}^"))
    }
}

/// Successful tool output: text for the model, a structured payload for traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolOutput {
    pub text: String,
    pub payload: Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attachments: Vec<Attachment>,
}

impl ToolOutput {
    pub fn new(text: impl Into<String>, payload: Value) -> Self {
        Self {
            text: text.into(),
            payload,
            attachments: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResult {
    pub ok: bool,
    pub text: String,
    #[serde(default)]
    pub payload: Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attachments: Vec<Attachment>,
}

impl ToolResult {
    pub fn error(message: impl fmt::Display) -> Self {
        Self {
            ok: false,
            text: format!("Error: {message}"),
            payload: Value::Null,
            attachments: Vec::new(),
        }
    }

    /// Short content hash used in trace records.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.text.as_bytes());
        for a in &self.attachments {
            h.update(serde_json::to_vec(a).unwrap_or_default());
        }
        hex::encode(&h.finalize()[..8])
    }
}

impl From<Result<ToolOutput, ToolError>> for ToolResult {
    fn from(r: Result<ToolOutput, ToolError>) -> Self {
        match r {
            Ok(out) => Self {
                ok: true,
                text: out.text,
                payload: out.payload,
                attachments: out.attachments,
            },
            Err(e) => Self::error(e),
        }
    }
}

/// Read-only resources the tools operate on.
#[derive(Clone, Copy)]
pub struct ToolEnv<'a> {
    pub corpus: &'a Corpus,
    pub index: &'a EmbeddingIndex,
    pub embedder: Option<&'a dyn Embedder>,
    pub aliases: &'a AliasTable,
    pub geocoder: Option<&'a dyn Geocoder>,
    pub search: Option<&'a dyn SearchClient>,
    /// Base directory for relative `image_ref` paths.
    pub image_root: Option<&'a Path>,
    /// Whether the chat client can receive image content.
    pub images: bool,
    pub explicit_memory: bool,
    pub default_top_k: usize,
}

impl<'a> ToolEnv<'a> {
    pub fn new(corpus: &'a Corpus, index: &'a EmbeddingIndex, aliases: &'a AliasTable) -> Self {
        Self {
            corpus,
            index,
            embedder: None,
            aliases,
            geocoder: None,
            search: None,
            image_root: None,
            images: false,
            explicit_memory: true,
            default_top_k: DEFAULT_TOP_K,
        }
    }
}
