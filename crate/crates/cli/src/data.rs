//! Loading corpora, indices and environment-configured clients.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;

use seeker::corpus::{user_id_from_path, Corpus};
use seeker::filterdsl::AliasTable;
use seeker::geocode::{CachingGeocoder, Geocoder, OpenCageGeocoder};
use seeker::toolkit::{SearchClient, SerperClient};
use seeker::vecindex::{Embedder, EmbeddingIndex, HashEmbedder, HttpEmbedder};

/// Where per-user corpora and embeddings come from.
#[derive(Args, Debug, Clone, Default)]
pub struct SourceArgs {
    /// Manifest files; the user id is the file name without `.manifest.jsonl` or `.jsonl`.
    #[arg(long = "corpus")]
    pub corpus: Vec<PathBuf>,
    /// Embeddings files, paired with `--corpus` in order.
    #[arg(long = "embeddings")]
    pub embeddings: Vec<PathBuf>,
    /// Directory holding `<user>.manifest.jsonl` and `<user>.embeddings.jsonl` per user.
    #[arg(long = "data-dir", conflicts_with_all = ["corpus", "embeddings"])]
    pub data_dir: Option<PathBuf>,
}

pub struct UserData {
    pub corpus: Corpus,
    pub index: EmbeddingIndex,
}

/// Loaded users; an `Err` entry records why a user's data is unavailable.
pub type Users = BTreeMap<String, Result<UserData, String>>;

fn load_pair(manifest: &Path, embeddings: &Path) -> Result<UserData> {
    let corpus = Corpus::load_manifest(manifest).with_context(|| format!("loading {}", manifest.display()))?;
    let index =
        EmbeddingIndex::load(embeddings, &corpus).with_context(|| format!("loading {}", embeddings.display()))?;
    Ok(UserData { corpus, index })
}

impl SourceArgs {
    /// Load the users named in `wanted`. Explicit file lists are loaded in
    /// full and must be valid; with `--data-dir` only wanted users are read.
    pub fn load<'a>(&self, wanted: impl IntoIterator<Item = &'a str>) -> Result<Users> {
        let mut users = Users::new();
        if let Some(dir) = &self.data_dir {
            for user in wanted {
                if users.contains_key(user) {
                    continue;
                }
                let m = dir.join(format!("{user}.manifest.jsonl"));
                let e = dir.join(format!("{user}.embeddings.jsonl"));
                let entry = load_pair(&m, &e).map_err(|err| {
                    log::warn!("user {user}: {err:#}");
                    format!("{err:#}")
                });
                users.insert(user.to_string(), entry);
            }
            return Ok(users);
        }
        if self.corpus.is_empty() {
            bail!("no corpus given: pass --corpus with --embeddings, or --data-dir");
        }
        if self.corpus.len() != self.embeddings.len() {
            bail!(
                "{} --corpus files but {} --embeddings files",
                self.corpus.len(),
                self.embeddings.len()
            );
        }
        for (m, e) in self.corpus.iter().zip(&self.embeddings) {
            let user = user_id_from_path(m);
            if users.contains_key(&user) {
                bail!("user {user} given twice");
            }
            users.insert(user, Ok(load_pair(m, e)?));
        }
        for user in wanted {
            users
                .entry(user.to_string())
                .or_insert_with(|| Err(format!("no corpus for user {user}")));
        }
        Ok(users)
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct EmbedArgs {
    /// Use the offline feature-hashing embedder with this dimension instead
    /// of the endpoint in EMBED_API_BASE.
    #[arg(long = "hash-dim")]
    pub hash_dim: Option<usize>,
}

impl EmbedArgs {
    pub fn optional(&self) -> Result<Option<(Box<dyn Embedder>, String)>> {
        if let Some(dim) = self.hash_dim {
            if dim == 0 {
                bail!("--hash-dim must be positive");
            }
            return Ok(Some((Box::new(HashEmbedder::new(dim)), format!("hash-{dim}"))));
        }
        match HttpEmbedder::from_env() {
            Some(e) => Ok(Some((Box::new(e?), "http".into()))),
            None => Ok(None),
        }
    }

    pub fn require(&self) -> Result<(Box<dyn Embedder>, String)> {
        match self.optional()? {
            Some(e) => Ok(e),
            None => bail!("no embedder: set EMBED_API_BASE or pass --hash-dim"),
        }
    }
}

/// Built-in aliases plus an optional JSONL file.
pub fn aliases(path: Option<&Path>) -> Result<AliasTable> {
    let mut table = AliasTable::builtin();
    if let Some(p) = path {
        table.extend_from_file(p)?;
    }
    Ok(table)
}

pub fn geocoder() -> Result<Option<Box<dyn Geocoder>>> {
    match OpenCageGeocoder::from_env() {
        Some(g) => Ok(Some(Box::new(CachingGeocoder::new(g?)))),
        None => Ok(None),
    }
}

pub fn search_client() -> Result<Option<Box<dyn SearchClient>>> {
    match SerperClient::from_env() {
        Some(s) => Ok(Some(Box::new(s?))),
        None => Ok(None),
    }
}
