//! Embedder clients: a deterministic feature-hashing mock and an HTTP client.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::client::{env_var, ClientError, HttpJson, ENV_EMBED_API_BASE};

/// Maps text or images to vectors of a fixed dimension.
pub trait Embedder: Send + Sync {
    fn embed_text(&self, text: &str) -> Result<Vec<f64>, ClientError>;

    fn embed_images(&self, image_refs: &[String]) -> Result<Vec<f64>, ClientError>;
}

/// Bag-of-words feature hashing. Vectors are not normalized here.
///
/// Tokens are lowercase alphanumeric runs; each token adds ±1 to one bucket.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn bucket(&self, token: &str) -> (usize, f64) {
        let digest = Sha256::digest(token.as_bytes());
        let mut raw = [0u8; 8];
        raw.copy_from_slice(&digest[..8]);
        let h = u64::from_le_bytes(raw);
        let sign = if digest[8] & 1 == 0 { 1.0 } else { -1.0 };
        ((h % self.dim as u64) as usize, sign)
    }

    pub fn embed(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for token in text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            let (i, s) = self.bucket(&token.to_lowercase());
            v[i] += s;
        }
        v
    }
}

impl Embedder for HashEmbedder {
    fn embed_text(&self, text: &str) -> Result<Vec<f64>, ClientError> {
        Ok(self.embed(text))
    }

    fn embed_images(&self, _image_refs: &[String]) -> Result<Vec<f64>, ClientError> {
        Err(ClientError::Unconfigured(
            "hash embedder cannot embed image content".into(),
        ))
    }
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum EmbedRequest<'a> {
    Text { text: &'a str },
    Images { image_refs: &'a [String] },
}

#[derive(Debug, Deserialize)]
struct EmbedResponse {
    vector: Vec<f64>,
}

/// Posts `{"text": ..}` or `{"image_refs": [..]}` and reads `{"vector": [..]}`.
pub struct HttpEmbedder {
    http: HttpJson,
    endpoint: String,
}

impl HttpEmbedder {
    pub fn new(endpoint: impl Into<String>) -> Result<Self, ClientError> {
        Ok(Self {
            http: HttpJson::new(Duration::from_secs(60))?,
            endpoint: endpoint.into(),
        })
    }

    pub fn from_env() -> Option<Result<Self, ClientError>> {
        env_var(ENV_EMBED_API_BASE).map(Self::new)
    }

    fn call(&self, req: &EmbedRequest<'_>) -> Result<Vec<f64>, ClientError> {
        let resp: EmbedResponse = self.http.post(&self.endpoint, &[], req)?;
        if resp.vector.is_empty() {
            return Err(ClientError::Protocol("embedder returned an empty vector".into()));
        }
        Ok(resp.vector)
    }
}

impl Embedder for HttpEmbedder {
    fn embed_text(&self, text: &str) -> Result<Vec<f64>, ClientError> {
        self.call(&EmbedRequest::Text { text })
    }

    fn embed_images(&self, image_refs: &[String]) -> Result<Vec<f64>, ClientError> {
        self.call(&EmbedRequest::Images { image_refs })
    }
}
