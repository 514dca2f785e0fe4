//! Argument records decoded from model-supplied JSON.
//!
//! Decoding is lenient where models commonly drift (numeric photo IDs,
//! integral floats) and strict about unknown parameter names.

use serde_json::{Map, Value};

use super::ToolError;
use crate::corpus::MetadataField;

struct Fields<'v> {
    map: Option<&'v Map<String, Value>>,
}

impl<'v> Fields<'v> {
    fn new(
        args: &'v Value,
        allowed: &[&str],
        memory_params: &[&'static str],
        explicit_memory: bool,
    ) -> Result<Self, ToolError> {
        let map = match args {
            Value::Object(m) => m,
            Value::Null => return Ok(Self { map: None }),
            other => {
                return Err(ToolError::InvalidArgs(format!(
                    "arguments must be a JSON object, got {other}"
                )))
            }
        };
        for key in map.keys() {
            if let Some(p) = memory_params.iter().find(|p| **p == key) {
                if !explicit_memory && !map[key].is_null() {
                    return Err(ToolError::MemoryDisabled(p));
                }
            } else if !allowed.contains(&key.as_str()) {
                return Err(ToolError::InvalidArgs(format!("unknown parameter `{key}`")));
            }
        }
        Ok(Self { map: Some(map) })
    }

    fn get(&self, key: &str) -> Option<&'v Value> {
        self.map?.get(key).filter(|v| !v.is_null())
    }

    fn string(&self, key: &str) -> Result<Option<String>, ToolError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(ToolError::InvalidArgs(format!("`{key}` must be a string"))),
        }
    }

    fn required_string(&self, key: &str) -> Result<String, ToolError> {
        self.string(key)?
            .ok_or_else(|| ToolError::InvalidArgs(format!("missing required parameter `{key}`")))
    }

    fn count(&self, key: &str) -> Result<Option<usize>, ToolError> {
        let bad = || ToolError::InvalidArgs(format!("`{key}` must be a positive integer"));
        match self.get(key) {
            None => Ok(None),
            Some(v) => {
                let n = v
                    .as_u64()
                    .or_else(|| v.as_f64().filter(|f| f.fract() == 0.0 && *f >= 0.0).map(|f| f as u64))
                    .or_else(|| v.as_str().and_then(|s| s.trim().parse().ok()))
                    .ok_or_else(bad)?;
                if n == 0 {
                    return Err(bad());
                }
                Ok(Some(n as usize))
            }
        }
    }

    fn ids(&self, key: &str) -> Result<Option<Vec<String>>, ToolError> {
        let Some(v) = self.get(key) else {
            return Ok(None);
        };
        let items = v
            .as_array()
            .ok_or_else(|| ToolError::InvalidArgs(format!("`{key}` must be a list of photo IDs")))?;
        items
            .iter()
            .map(|item| match item {
                Value::String(s) => Ok(s.trim().to_string()),
                Value::Number(n) => Ok(n.to_string()),
                _ => Err(ToolError::InvalidArgs(format!(
                    "`{key}` must contain photo ID strings, found {item}"
                ))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImageSearchArgs {
    pub text: Option<String>,
    pub photos: Vec<String>,
    pub top_k: Option<usize>,
    pub save_as: Option<String>,
    pub search_within: Option<String>,
}

impl ImageSearchArgs {
    pub fn from_json(args: &Value, explicit_memory: bool) -> Result<Self, ToolError> {
        let f = Fields::new(
            args,
            &["text", "photos", "top_k"],
            &["save_as", "search_within"],
            explicit_memory,
        )?;
        Ok(Self {
            text: f.string("text")?,
            photos: f.ids("photos")?.unwrap_or_default(),
            top_k: f.count("top_k")?,
            save_as: f.string("save_as")?,
            search_within: f.string("search_within")?,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GetMetadataArgs {
    pub photos: Vec<String>,
    pub fields: Option<Vec<MetadataField>>,
}

impl GetMetadataArgs {
    pub fn from_json(args: &Value) -> Result<Self, ToolError> {
        let f = Fields::new(args, &["photos", "fields"], &[], true)?;
        let photos = f
            .ids("photos")?
            .ok_or_else(|| ToolError::InvalidArgs("missing required parameter `photos`".into()))?;
        let fields = match f.get("fields") {
            None => None,
            Some(Value::Array(items)) => {
                let parsed = items
                    .iter()
                    .map(|i| i.as_str().and_then(MetadataField::parse).ok_or(ToolError::BadFields))
                    .collect::<Result<Vec<_>, _>>()?;
                if parsed.is_empty() {
                    return Err(ToolError::BadFields);
                }
                Some(parsed)
            }
            Some(Value::String(s)) => Some(vec![MetadataField::parse(s).ok_or(ToolError::BadFields)?]),
            Some(_) => return Err(ToolError::BadFields),
        };
        Ok(Self { photos, fields })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterMetadataArgs {
    pub expression: String,
    pub save_as: Option<String>,
    pub filter_within: Option<String>,
}

impl FilterMetadataArgs {
    pub fn from_json(args: &Value, explicit_memory: bool) -> Result<Self, ToolError> {
        let f = Fields::new(args, &["expression"], &["save_as", "filter_within"], explicit_memory)?;
        Ok(Self {
            expression: f.required_string("expression")?,
            save_as: f.string("save_as")?,
            filter_within: f.string("filter_within")?,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ViewPhotosArgs {
    pub photos: Vec<String>,
}

impl ViewPhotosArgs {
    pub fn from_json(args: &Value) -> Result<Self, ToolError> {
        let f = Fields::new(args, &["photos"], &[], true)?;
        Ok(Self {
            photos: f
                .ids("photos")?
                .ok_or_else(|| ToolError::InvalidArgs("missing required parameter `photos`".into()))?,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WebSearchArgs {
    pub query: String,
    pub top_k: Option<usize>,
}

impl WebSearchArgs {
    pub fn from_json(args: &Value) -> Result<Self, ToolError> {
        let f = Fields::new(args, &["query", "top_k"], &[], true)?;
        Ok(Self {
            query: f.required_string("query")?,
            top_k: f.count("top_k")?,
        })
    }
}
