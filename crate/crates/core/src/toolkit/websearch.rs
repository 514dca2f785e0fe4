use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::client::{env_var, ClientError, HttpJson, ENV_SEARCH_API_KEY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WebResult {
    pub rank: usize,
    pub title: String,
    pub snippet: String,
    pub url: String,
}

pub trait SearchClient: Send + Sync {
    /// At most `top_k` results in provider order.
    fn search(&self, query: &str, top_k: usize) -> Result<Vec<WebResult>, ClientError>;
}

/// Serper.dev Google search API.
pub struct SerperClient {
    http: HttpJson,
    endpoint: String,
    api_key: String,
}

impl SerperClient {
    pub const DEFAULT_ENDPOINT: &'static str = "https://google.serper.dev/search";

    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>) -> Result<Self, ClientError> {
        Ok(Self {
            http: HttpJson::new(Duration::from_secs(30))?,
            endpoint: endpoint.into(),
            api_key: api_key.into(),
        })
    }

    /// Configured from `SEARCH_API_KEY`; `None` when the key is absent.
    pub fn from_env() -> Option<Result<Self, ClientError>> {
        let key = env_var(ENV_SEARCH_API_KEY)?;
        Some(Self::new(Self::DEFAULT_ENDPOINT, key))
    }
}

pub fn parse_serper(body: &Value, top_k: usize) -> Vec<WebResult> {
    let str_of = |v: &Value, k: &str| v.get(k).and_then(Value::as_str).unwrap_or_default().to_string();
    body.get("organic")
        .and_then(Value::as_array)
        .map(|items| {
            items
                .iter()
                .take(top_k)
                .enumerate()
                .map(|(i, item)| WebResult {
                    rank: item
                        .get("position")
                        .and_then(Value::as_u64)
                        .map_or(i + 1, |p| p as usize),
                    title: str_of(item, "title"),
                    snippet: str_of(item, "snippet"),
                    url: str_of(item, "link"),
                })
                .collect()
        })
        .unwrap_or_default()
}

impl SearchClient for SerperClient {
    fn search(&self, query: &str, top_k: usize) -> Result<Vec<WebResult>, ClientError> {
        let body: Value = self.http.post(
            &self.endpoint,
            &[("X-API-KEY", self.api_key.clone())],
            &json!({"q": query, "num": top_k.max(1)}),
        )?;
        Ok(parse_serper(&body, top_k))
    }
}

/// Returns the same canned results for every query.
#[derive(Debug, Clone, Default)]
pub struct StaticSearchClient {
    pub results: Vec<WebResult>,
}

impl StaticSearchClient {
    pub fn new(results: Vec<WebResult>) -> Self {
        Self { results }
    }
}

impl SearchClient for StaticSearchClient {
    fn search(&self, _query: &str, top_k: usize) -> Result<Vec<WebResult>, ClientError> {
        Ok(self.results.iter().take(top_k).cloned().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serper_shape() {
        let body = json!({"organic": [
            {"title": "Wendover", "link": "https://a", "snippet": "A town", "position": 1},
            {"title": "Wendover Woods", "link": "https://b", "snippet": "Forest", "position": 2},
            {"title": "x", "link": "https://c", "snippet": "y", "position": 3}
        ]});
        let r = parse_serper(&body, 2);
        assert_eq!(r.len(), 2);
        assert_eq!(r[1].title, "Wendover Woods");
        assert_eq!(r[1].rank, 2);
        assert!(parse_serper(&json!({}), 5).is_empty());
    }
}
