//! Photo collection loading and metadata access.
//!
//! A [`Corpus`] is one user's chronologically ordered visual history. It is
//! loaded from a JSONL manifest, validated once, and never mutated afterwards.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::geocode::Geocoder;

/// Fields understood in a manifest record. Anything else is ignored.
const MANIFEST_FIELDS: &[&str] = &[
    "photo_id",
    "photoset_id",
    "time",
    "lat",
    "lon",
    "address",
    "caption",
    "image_ref",
];

/// Marker returned in place of an address that cannot be produced.
pub const ADDRESS_UNAVAILABLE: &str = "address unavailable";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: missing required field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: field `{field}`: {message}")]
    InvalidField {
        line: usize,
        field: &'static str,
        message: String,
    },
    #[error("line {line}: unparseable timestamp in field `time`: {value:?}")]
    BadTimestamp { line: usize, value: String },
    #[error("line {line}: duplicate photo_id {photo_id:?}")]
    DuplicatePhoto { line: usize, photo_id: String },
    #[error("unknown photo id {0:?}")]
    UnknownPhoto(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Photo {
    pub photo_id: String,
    pub photoset_id: String,
    pub timestamp: DateTime<Utc>,
    pub latitude: Option<f64>,
    pub longitude: Option<f64>,
    pub address: Option<String>,
    pub caption: Option<String>,
    pub image_ref: Option<String>,
}

impl Photo {
    /// ISO-8601 rendering used everywhere a timestamp is shown.
    pub fn time_iso(&self) -> String {
        format_time(&self.timestamp)
    }

    pub fn coordinates(&self) -> Option<(f64, f64)> {
        Some((self.latitude?, self.longitude?))
    }

    /// The stored address, or one reverse-geocoded from coordinates.
    pub fn resolved_address(&self, geocoder: Option<&dyn Geocoder>) -> Option<String> {
        if let Some(addr) = &self.address {
            return Some(addr.clone());
        }
        let (lat, lon) = self.coordinates()?;
        match geocoder?.reverse(lat, lon) {
            Ok(found) => found,
            Err(e) => {
                log::warn!("reverse geocoding {} failed: {e}", self.photo_id);
                None
            }
        }
    }
}

pub fn format_time(ts: &DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Parse an ISO-8601 timestamp. Values without an offset are taken as UTC.
pub fn parse_time(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.with_timezone(&Utc));
    }
    for fmt in [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(naive.and_utc());
        }
    }
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|n| n.and_utc())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Photoset {
    pub photoset_id: String,
    pub photo_ids: Vec<String>,
}

/// Metadata fields exposed to the agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetadataField {
    Time,
    Address,
}

impl MetadataField {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "time" => Some(Self::Time),
            "address" => Some(Self::Address),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetadataRecord {
    pub photo_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub address: Option<String>,
}

/// Result of loading a manifest: the corpus plus non-fatal warnings.
#[derive(Debug)]
pub struct ManifestLoad {
    pub corpus: Corpus,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub user_id: String,
    photos: HashMap<String, Photo>,
    photosets: BTreeMap<String, Photoset>,
    chronological: Vec<String>,
}

impl Corpus {
    /// Build and validate a corpus from already-parsed photos.
    ///
    /// Photosets are synthesized from `photoset_id`, members in chronological order.
    pub fn from_photos(
        user_id: impl Into<String>,
        photos: impl IntoIterator<Item = Photo>,
    ) -> Result<Self, CorpusError> {
        let mut map = HashMap::new();
        for (i, photo) in photos.into_iter().enumerate() {
            validate_coords(i + 1, &photo)?;
            if map.contains_key(&photo.photo_id) {
                return Err(CorpusError::DuplicatePhoto {
                    line: i + 1,
                    photo_id: photo.photo_id,
                });
            }
            map.insert(photo.photo_id.clone(), photo);
        }
        Ok(Self::assemble(user_id.into(), map))
    }

    fn assemble(user_id: String, photos: HashMap<String, Photo>) -> Self {
        let mut chronological: Vec<String> = photos.keys().cloned().collect();
        chronological.sort_by(|a, b| photos[a].timestamp.cmp(&photos[b].timestamp).then_with(|| a.cmp(b)));
        let mut photosets: BTreeMap<String, Photoset> = BTreeMap::new();
        for id in &chronological {
            let set_id = &photos[id].photoset_id;
            photosets
                .entry(set_id.clone())
                .or_insert_with(|| Photoset {
                    photoset_id: set_id.clone(),
                    photo_ids: Vec::new(),
                })
                .photo_ids
                .push(id.clone());
        }
        Self {
            user_id,
            photos,
            photosets,
            chronological,
        }
    }

    pub fn load_manifest(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let loaded = Self::load_manifest_report(path)?;
        for w in &loaded.warnings {
            log::warn!("{w}");
        }
        Ok(loaded.corpus)
    }

    /// Load a manifest; the user id is the file stem with any `.manifest` suffix removed.
    pub fn load_manifest_report(path: impl AsRef<Path>) -> Result<ManifestLoad, CorpusError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let user_id = user_id_from_path(path);
        Self::parse_manifest(&user_id, &text)
    }

    pub fn parse_manifest(user_id: &str, text: &str) -> Result<ManifestLoad, CorpusError> {
        let mut photos: HashMap<String, Photo> = HashMap::new();
        let mut warnings = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let value: Value = serde_json::from_str(raw).map_err(|e| CorpusError::Malformed {
                line,
                message: e.to_string(),
            })?;
            let Value::Object(obj) = value else {
                return Err(CorpusError::Malformed {
                    line,
                    message: "expected a JSON object".into(),
                });
            };
            for key in obj.keys() {
                if !MANIFEST_FIELDS.contains(&key.as_str()) {
                    warnings.push(format!("line {line}: ignoring unknown field `{key}`"));
                }
            }
            let photo = photo_from_record(line, &obj)?;
            if photos.contains_key(&photo.photo_id) {
                return Err(CorpusError::DuplicatePhoto {
                    line,
                    photo_id: photo.photo_id,
                });
            }
            photos.insert(photo.photo_id.clone(), photo);
        }
        Ok(ManifestLoad {
            corpus: Self::assemble(user_id.to_string(), photos),
            warnings,
        })
    }

    /// Render the corpus back into manifest lines (chronological order).
    pub fn to_manifest(&self) -> String {
        let mut out = String::new();
        for photo in self.iter_chronological() {
            let mut obj = Map::new();
            obj.insert("photo_id".into(), photo.photo_id.clone().into());
            obj.insert("photoset_id".into(), photo.photoset_id.clone().into());
            obj.insert("time".into(), photo.time_iso().into());
            if let Some(lat) = photo.latitude {
                obj.insert("lat".into(), lat.into());
            }
            if let Some(lon) = photo.longitude {
                obj.insert("lon".into(), lon.into());
            }
            for (key, val) in [
                ("address", &photo.address),
                ("caption", &photo.caption),
                ("image_ref", &photo.image_ref),
            ] {
                if let Some(v) = val {
                    obj.insert(key.into(), v.clone().into());
                }
            }
            out.push_str(&Value::Object(obj).to_string());
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.photos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.photos.is_empty()
    }

    pub fn contains(&self, photo_id: &str) -> bool {
        self.photos.contains_key(photo_id)
    }

    pub fn photo(&self, photo_id: &str) -> Result<&Photo, CorpusError> {
        self.photos
            .get(photo_id)
            .ok_or_else(|| CorpusError::UnknownPhoto(photo_id.to_string()))
    }

    /// Photo ids sorted by (timestamp, photo_id).
    pub fn chronological_index(&self) -> &[String] {
        &self.chronological
    }

    pub fn iter_chronological(&self) -> impl Iterator<Item = &Photo> {
        self.chronological.iter().map(|id| &self.photos[id])
    }

    pub fn photosets(&self) -> impl Iterator<Item = &Photoset> {
        self.photosets.values()
    }

    pub fn photoset(&self, photoset_id: &str) -> Option<&Photoset> {
        self.photosets.get(photoset_id)
    }

    /// The photoset containing `photo_id`. Not exposed to agents.
    pub fn photoset_of(&self, photo_id: &str) -> Result<&Photoset, CorpusError> {
        let photo = self.photo(photo_id)?;
        Ok(&self.photosets[&photo.photoset_id])
    }

    /// Position of each photo in the chronological index.
    pub fn chronological_rank(&self) -> HashMap<&str, usize> {
        self.chronological
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect()
    }

    /// Per-photo metadata records in input order. Any unknown id fails the whole call.
    pub fn get_metadata(
        &self,
        photo_ids: &[String],
        fields: Option<&[MetadataField]>,
        geocoder: Option<&dyn Geocoder>,
    ) -> Result<Vec<MetadataRecord>, CorpusError> {
        let photos = photo_ids
            .iter()
            .map(|id| self.photo(id))
            .collect::<Result<Vec<_>, _>>()?;
        let wants = |f: MetadataField| fields.is_none_or(|fs| fs.contains(&f));
        Ok(photos
            .into_iter()
            .map(|photo| MetadataRecord {
                photo_id: photo.photo_id.clone(),
                time: wants(MetadataField::Time).then(|| photo.time_iso()),
                address: wants(MetadataField::Address).then(|| {
                    photo
                        .resolved_address(geocoder)
                        .unwrap_or_else(|| ADDRESS_UNAVAILABLE.to_string())
                }),
            })
            .collect())
    }
}

pub fn user_id_from_path(path: &Path) -> String {
    let stem = path.file_name().and_then(|s| s.to_str()).unwrap_or("user").to_string();
    let stem = stem.strip_suffix(".jsonl").unwrap_or(&stem);
    let stem = stem.strip_suffix(".manifest").unwrap_or(stem);
    stem.to_string()
}

fn validate_coords(line: usize, photo: &Photo) -> Result<(), CorpusError> {
    if let Some(lat) = photo.latitude {
        if !(-90.0..=90.0).contains(&lat) {
            return Err(CorpusError::InvalidField {
                line,
                field: "lat",
                message: format!("{lat} outside [-90, 90]"),
            });
        }
    }
    if let Some(lon) = photo.longitude {
        if !(-180.0..=180.0).contains(&lon) {
            return Err(CorpusError::InvalidField {
                line,
                field: "lon",
                message: format!("{lon} outside [-180, 180]"),
            });
        }
    }
    Ok(())
}

fn photo_from_record(line: usize, obj: &Map<String, Value>) -> Result<Photo, CorpusError> {
    let required = |field: &'static str| -> Result<String, CorpusError> {
        match obj.get(field) {
            None | Some(Value::Null) => Err(CorpusError::MissingField { line, field }),
            Some(Value::String(s)) if !s.is_empty() => Ok(s.clone()),
            Some(Value::String(_)) => Err(CorpusError::InvalidField {
                line,
                field,
                message: "must be non-empty".into(),
            }),
            Some(_) => Err(CorpusError::InvalidField {
                line,
                field,
                message: "expected a string".into(),
            }),
        }
    };
    let optional_str = |field: &'static str| -> Result<Option<String>, CorpusError> {
        match obj.get(field) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(CorpusError::InvalidField {
                line,
                field,
                message: "expected a string".into(),
            }),
        }
    };
    let optional_num = |field: &'static str| -> Result<Option<f64>, CorpusError> {
        match obj.get(field) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::Number(n)) => Ok(n.as_f64()),
            Some(_) => Err(CorpusError::InvalidField {
                line,
                field,
                message: "expected a number".into(),
            }),
        }
    };

    let photo_id = required("photo_id")?;
    let photoset_id = required("photoset_id")?;
    let raw_time = required("time")?;
    let timestamp = parse_time(&raw_time).ok_or(CorpusError::BadTimestamp { line, value: raw_time })?;
    let photo = Photo {
        photo_id,
        photoset_id,
        timestamp,
        latitude: optional_num("lat")?,
        longitude: optional_num("lon")?,
        address: optional_str("address")?,
        caption: optional_str("caption")?,
        image_ref: optional_str("image_ref")?,
    };
    validate_coords(line, &photo)?;
    Ok(photo)
}

/// Index of every photo by its photoset; used by tests and the synthesis pipeline.
pub fn photoset_members(corpus: &Corpus) -> HashMap<String, HashSet<String>> {
    corpus
        .photosets()
        .map(|ps| (ps.photoset_id.clone(), ps.photo_ids.iter().cloned().collect()))
        .collect()
}
