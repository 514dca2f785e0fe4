use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

/// Common country and region abbreviations.
const BUILTIN: &[(&str, &str)] = &[
    ("us", "United States"),
    ("usa", "United States"),
    ("u.s.", "United States"),
    ("u.s.a.", "United States"),
    ("united states of america", "United States"),
    ("america", "United States"),
    ("uk", "United Kingdom"),
    ("u.k.", "United Kingdom"),
    ("great britain", "United Kingdom"),
    ("britain", "United Kingdom"),
    ("uae", "United Arab Emirates"),
    ("holland", "Netherlands"),
    ("the netherlands", "Netherlands"),
    ("prc", "China"),
    ("nyc", "New York"),
    ("dc", "District of Columbia"),
    ("nz", "New Zealand"),
    ("aus", "Australia"),
];

#[derive(Debug, Error)]
pub enum AliasError {
    #[error("failed to read alias file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("alias file line {line}: {message}")]
    Malformed { line: usize, message: String },
}

#[derive(Debug, Deserialize)]
struct AliasRecord {
    alias: String,
    canonical: String,
}

/// Case-insensitive alias → canonical location name table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AliasTable {
    entries: BTreeMap<String, String>,
}

impl AliasTable {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn builtin() -> Self {
        let mut t = Self::empty();
        for (a, c) in BUILTIN {
            t.insert(a, c);
        }
        t
    }

    /// Add or replace an alias. Empty canonical names are ignored.
    pub fn insert(&mut self, alias: &str, canonical: &str) {
        let alias = alias.trim().to_lowercase();
        let canonical = canonical.trim();
        if alias.is_empty() || canonical.is_empty() {
            return;
        }
        self.entries.insert(alias, canonical.to_string());
    }

    /// Extend with entries from a JSONL file of `{"alias", "canonical"}` records.
    pub fn extend_from_file(&mut self, path: impl AsRef<Path>) -> Result<(), AliasError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| AliasError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.extend_from_jsonl(&text)
    }

    pub fn extend_from_jsonl(&mut self, text: &str) -> Result<(), AliasError> {
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: AliasRecord = serde_json::from_str(line).map_err(|e| AliasError::Malformed {
                line: i + 1,
                message: e.to_string(),
            })?;
            if rec.canonical.trim().is_empty() {
                return Err(AliasError::Malformed {
                    line: i + 1,
                    message: "canonical must be non-empty".into(),
                });
            }
            self.insert(&rec.alias, &rec.canonical);
        }
        Ok(())
    }

    pub fn lookup(&self, alias: &str) -> Option<&str> {
        self.entries.get(&alias.trim().to_lowercase()).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Replace the whole query if it is an alias, otherwise each whitespace token that is one.
    pub fn normalize(&self, query: &str) -> String {
        let query = query.trim();
        if let Some(c) = self.lookup(query) {
            return c.to_string();
        }
        query
            .split_whitespace()
            .map(|tok| {
                let core = tok.trim_end_matches([',', ';']);
                match self.lookup(core) {
                    Some(c) => format!("{c}{}", &tok[core.len()..]),
                    None => tok.to_string(),
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whole_query_and_token_replacement() {
        let t = AliasTable::builtin();
        assert_eq!(t.normalize("US"), "United States");
        assert_eq!(t.normalize(" u.k. "), "United Kingdom");
        assert_eq!(t.normalize("Portland, US"), "Portland, United States");
        assert_eq!(t.normalize("Russia"), "Russia");
        assert_eq!(t.normalize("Bournemouth"), "Bournemouth");
    }

    #[test]
    fn file_extension() {
        let mut t = AliasTable::empty();
        t.extend_from_jsonl("{\"alias\":\"Bmth\",\"canonical\":\"Bournemouth\"}\n\n")
            .unwrap();
        assert_eq!(t.lookup("BMTH"), Some("Bournemouth"));
        assert!(t.extend_from_jsonl("{\"alias\":\"x\",\"canonical\":\"  \"}").is_err());
        assert!(t.extend_from_jsonl("nope").is_err());
    }
}
