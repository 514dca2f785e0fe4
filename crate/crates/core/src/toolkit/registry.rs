use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ToolError;
use crate::corpus::Corpus;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEvent {
    pub name: String,
    pub count: usize,
    pub overwrote: bool,
}

/// Named photo subsets kept across turns (explicit state memory).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetRegistry {
    subsets: BTreeMap<String, Vec<String>>,
    log: Vec<RegistryEvent>,
}

impl SubsetRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn validate_name(name: &str) -> Result<(), ToolError> {
        if name.trim().is_empty() {
            return Err(ToolError::InvalidArgs("subset names must be non-empty".into()));
        }
        Ok(())
    }

    /// Store `ids` under `name`. Returns whether an existing subset was replaced.
    pub fn save(&mut self, name: &str, ids: Vec<String>, corpus: &Corpus) -> Result<bool, ToolError> {
        Self::validate_name(name)?;
        if let Some(bad) = ids.iter().find(|id| !corpus.contains(id)) {
            return Err(ToolError::UnknownPhoto(bad.clone()));
        }
        let count = ids.len();
        let overwrote = self.subsets.insert(name.to_string(), ids).is_some();
        if overwrote {
            log::info!("subset {name:?} overwritten ({count} photos)");
        }
        self.log.push(RegistryEvent {
            name: name.to_string(),
            count,
            overwrote,
        });
        Ok(overwrote)
    }

    pub fn resolve(&self, name: &str) -> Result<&[String], ToolError> {
        self.subsets
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| ToolError::UnknownSubset(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.subsets.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    /// Creation and overwrite events in order.
    pub fn log(&self) -> &[RegistryEvent] {
        &self.log
    }

    /// Canonical byte form, used to check the registry is untouched.
    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("registry serializes")
    }
}

/// Look up an optional subset name.
pub fn resolve_subset<'r>(registry: &'r SubsetRegistry, name: &str) -> Result<&'r [String], ToolError> {
    registry.resolve(name)
}
