//! Geocoding clients used for address fallback and coordinate lookup.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Duration;

use serde::Deserialize;

use crate::client::{env_var, ClientError, HttpJson, ENV_GEOCODER_API_KEY};

/// Forward and reverse place-name resolution.
pub trait Geocoder: Send + Sync {
    /// Canonical place names for a free-form location query.
    fn forward(&self, query: &str) -> Result<Vec<String>, ClientError>;

    /// Human-readable address for a coordinate pair, if one is known.
    fn reverse(&self, lat: f64, lon: f64) -> Result<Option<String>, ClientError>;
}

/// Fixed lookup tables, for tests and offline runs.
#[derive(Debug, Default, Clone)]
pub struct StaticGeocoder {
    pub places: HashMap<String, Vec<String>>,
    pub addresses: Vec<((f64, f64), String)>,
    pub fail: bool,
}

impl StaticGeocoder {
    pub fn with_place(mut self, query: &str, names: &[&str]) -> Self {
        self.places
            .insert(query.to_lowercase(), names.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn with_address(mut self, lat: f64, lon: f64, address: &str) -> Self {
        self.addresses.push(((lat, lon), address.to_string()));
        self
    }

    pub fn failing() -> Self {
        Self {
            fail: true,
            ..Self::default()
        }
    }
}

impl Geocoder for StaticGeocoder {
    fn forward(&self, query: &str) -> Result<Vec<String>, ClientError> {
        if self.fail {
            return Err(ClientError::Transport("static geocoder set to fail".into()));
        }
        Ok(self
            .places
            .get(&query.trim().to_lowercase())
            .cloned()
            .unwrap_or_default())
    }

    fn reverse(&self, lat: f64, lon: f64) -> Result<Option<String>, ClientError> {
        if self.fail {
            return Err(ClientError::Transport("static geocoder set to fail".into()));
        }
        Ok(self
            .addresses
            .iter()
            .find(|((a, b), _)| (a - lat).abs() < 1e-6 && (b - lon).abs() < 1e-6)
            .map(|(_, addr)| addr.clone()))
    }
}

/// Memoizes forward and reverse lookups of an inner geocoder.
pub struct CachingGeocoder<G> {
    inner: G,
    forward: Mutex<HashMap<String, Vec<String>>>,
    reverse: Mutex<HashMap<(u64, u64), Option<String>>>,
}

impl<G: Geocoder> CachingGeocoder<G> {
    pub fn new(inner: G) -> Self {
        Self {
            inner,
            forward: Mutex::new(HashMap::new()),
            reverse: Mutex::new(HashMap::new()),
        }
    }
}

impl<G: Geocoder> Geocoder for CachingGeocoder<G> {
    fn forward(&self, query: &str) -> Result<Vec<String>, ClientError> {
        let key = query.trim().to_lowercase();
        if let Some(hit) = self.forward.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let found = self.inner.forward(query)?;
        self.forward.lock().unwrap().insert(key, found.clone());
        Ok(found)
    }

    fn reverse(&self, lat: f64, lon: f64) -> Result<Option<String>, ClientError> {
        let key = (lat.to_bits(), lon.to_bits());
        if let Some(hit) = self.reverse.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let found = self.inner.reverse(lat, lon)?;
        self.reverse.lock().unwrap().insert(key, found.clone());
        Ok(found)
    }
}

#[derive(Debug, Deserialize)]
struct OpenCageResponse {
    #[serde(default)]
    results: Vec<OpenCageResult>,
}

#[derive(Debug, Deserialize)]
struct OpenCageResult {
    formatted: String,
}

/// OpenCage-compatible HTTP geocoder.
pub struct OpenCageGeocoder {
    http: HttpJson,
    endpoint: String,
    api_key: String,
    limit: usize,
}

impl OpenCageGeocoder {
    pub const DEFAULT_ENDPOINT: &'static str = "https://api.opencagedata.com/geocode/v1/json";

    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>) -> Result<Self, ClientError> {
        Ok(Self {
            http: HttpJson::new(Duration::from_secs(20))?,
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            limit: 5,
        })
    }

    /// Configured from `GEOCODER_API_KEY`; `None` when the key is absent.
    pub fn from_env() -> Option<Result<Self, ClientError>> {
        let key = env_var(ENV_GEOCODER_API_KEY)?;
        Some(Self::new(Self::DEFAULT_ENDPOINT, key))
    }

    fn lookup(&self, q: String) -> Result<Vec<String>, ClientError> {
        let resp: OpenCageResponse = self.http.get(
            &self.endpoint,
            &[
                ("q", q),
                ("key", self.api_key.clone()),
                ("limit", self.limit.to_string()),
                ("no_annotations", "1".into()),
            ],
        )?;
        Ok(resp.results.into_iter().map(|r| r.formatted).collect())
    }
}

impl Geocoder for OpenCageGeocoder {
    /// Each result contributes its formatted name and its leading place segment.
    fn forward(&self, query: &str) -> Result<Vec<String>, ClientError> {
        let mut names = Vec::new();
        for formatted in self.lookup(query.to_string())? {
            if let Some(head) = formatted.split(',').next().map(str::trim) {
                if !head.is_empty() && head != formatted && !names.iter().any(|n| n == head) {
                    names.push(head.to_string());
                }
            }
            if !names.contains(&formatted) {
                names.push(formatted);
            }
        }
        Ok(names)
    }

    fn reverse(&self, lat: f64, lon: f64) -> Result<Option<String>, ClientError> {
        Ok(self.lookup(format!("{lat},{lon}"))?.into_iter().next())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting(AtomicUsize);

    impl Geocoder for Counting {
        fn forward(&self, q: &str) -> Result<Vec<String>, ClientError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Ok(vec![q.to_uppercase()])
        }
        fn reverse(&self, _: f64, _: f64) -> Result<Option<String>, ClientError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Ok(Some("X".into()))
        }
    }

    #[test]
    fn cache_hits_skip_inner_client() {
        let g = CachingGeocoder::new(Counting(AtomicUsize::new(0)));
        assert_eq!(g.forward("paris").unwrap(), vec!["PARIS"]);
        assert_eq!(g.forward("Paris ").unwrap(), vec!["PARIS"]);
        g.reverse(1.0, 2.0).unwrap();
        g.reverse(1.0, 2.0).unwrap();
        assert_eq!(g.inner.0.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn static_lookup() {
        let g = StaticGeocoder::default()
            .with_place("The Big Apple", &["New York, United States"])
            .with_address(50.72, -1.88, "Bournemouth, England, United Kingdom");
        assert_eq!(g.forward("the big apple").unwrap(), vec!["New York, United States"]);
        assert_eq!(
            g.reverse(50.72, -1.88).unwrap().as_deref(),
            Some("Bournemouth, England, United Kingdom")
        );
        assert!(StaticGeocoder::failing().forward("x").is_err());
    }

    #[test]
    fn opencage_response_shape() {
        let body =
            r#"{"results":[{"formatted":"Wendover, England, United Kingdom","geometry":{}}],"status":{"code":200}}"#;
        let parsed: OpenCageResponse = serde_json::from_str(body).unwrap();
        assert_eq!(parsed.results[0].formatted, "Wendover, England, United Kingdom");
    }
}
