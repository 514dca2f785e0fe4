//! Shared plumbing for networked model and service clients.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

pub const ENV_LLM_API_BASE: &str = "LLM_API_BASE";
pub const ENV_LLM_API_KEY: &str = "LLM_API_KEY";
pub const ENV_LLM_MODEL: &str = "LLM_MODEL";
pub const ENV_SUMMARIZER_API_BASE: &str = "SUMMARIZER_API_BASE";
pub const ENV_EMBED_API_BASE: &str = "EMBED_API_BASE";
pub const ENV_SEARCH_API_KEY: &str = "SEARCH_API_KEY";
pub const ENV_GEOCODER_API_KEY: &str = "GEOCODER_API_KEY";

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ClientError {
    #[error("client not configured: {0}")]
    Unconfigured(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("http status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("protocol error: {0}")]
    Protocol(String),
}

impl ClientError {
    /// Transient failures worth another attempt.
    pub fn is_retryable(&self) -> bool {
        match self {
            Self::Transport(_) => true,
            Self::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

pub fn env_var(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.trim().is_empty())
}

/// Thin blocking JSON-over-HTTP helper shared by every networked client.
#[derive(Debug, Clone)]
pub struct HttpJson {
    client: reqwest::blocking::Client,
}

impl HttpJson {
    pub fn new(timeout: Duration) -> Result<Self, ClientError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        Ok(Self { client })
    }

    pub fn post<B: Serialize + ?Sized, R: DeserializeOwned>(
        &self,
        url: &str,
        headers: &[(&str, String)],
        body: &B,
    ) -> Result<R, ClientError> {
        let mut req = self.client.post(url).json(body);
        for (name, value) in headers {
            req = req.header(*name, value);
        }
        Self::finish(req.send())
    }

    pub fn get<R: DeserializeOwned>(&self, url: &str, query: &[(&str, String)]) -> Result<R, ClientError> {
        Self::finish(self.client.get(url).query(query).send())
    }

    fn finish<R: DeserializeOwned>(sent: reqwest::Result<reqwest::blocking::Response>) -> Result<R, ClientError> {
        let resp = sent.map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| ClientError::Transport(e.to_string()))?;
        if !status.is_success() {
            let mut body = text;
            body.truncate(512);
            return Err(ClientError::Status {
                status: status.as_u16(),
                body,
            });
        }
        serde_json::from_str(&text).map_err(|e| ClientError::Protocol(e.to_string()))
    }
}

/// Run `op` up to `attempts` times, sleeping `base_delay * 2^i` between retryable failures.
pub fn with_retries<T>(
    attempts: u32,
    base_delay: Duration,
    mut op: impl FnMut() -> Result<T, ClientError>,
) -> Result<T, ClientError> {
    let attempts = attempts.max(1);
    let mut delay = base_delay;
    let mut attempt = 1;
    loop {
        match op() {
            Ok(v) => return Ok(v),
            Err(e) if e.is_retryable() && attempt < attempts => {
                log::warn!("attempt {attempt}/{attempts} failed: {e}; retrying");
                if !delay.is_zero() {
                    std::thread::sleep(delay);
                }
                delay *= 2;
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    #[test]
    fn retries_transient_then_succeeds() {
        let calls = Cell::new(0);
        let out = with_retries(3, Duration::ZERO, || {
            calls.set(calls.get() + 1);
            if calls.get() < 3 {
                Err(ClientError::Transport("reset".into()))
            } else {
                Ok(7)
            }
        });
        assert_eq!(out, Ok(7));
        assert_eq!(calls.get(), 3);
    }

    #[test]
    fn gives_up_after_bound_and_skips_permanent() {
        let calls = Cell::new(0);
        let out: Result<(), _> = with_retries(3, Duration::ZERO, || {
            calls.set(calls.get() + 1);
            Err(ClientError::Status {
                status: 503,
                body: String::new(),
            })
        });
        assert!(out.is_err());
        assert_eq!(calls.get(), 3);

        calls.set(0);
        let out: Result<(), _> = with_retries(3, Duration::ZERO, || {
            calls.set(calls.get() + 1);
            Err(ClientError::Protocol("bad json".into()))
        });
        assert!(out.is_err());
        assert_eq!(calls.get(), 1);
    }
}
