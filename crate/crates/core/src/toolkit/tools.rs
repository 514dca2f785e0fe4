use std::fs;
use std::path::Path;

use base64::Engine;
use serde_json::json;

use super::args::{FilterMetadataArgs, GetMetadataArgs, ImageSearchArgs, ViewPhotosArgs, WebSearchArgs};
use super::{SubsetRegistry, ToolEnv, ToolError, ToolOutput};
use crate::chat::Attachment;
use crate::corpus::{Photo, ADDRESS_UNAVAILABLE};
use crate::filterdsl::{self, filter_scope, FilterContext};
use crate::memory::{CompressionEvent, ContextMemory, Summarizer};
use crate::vecindex::QueryCue;

pub const VIEW_LIMIT: usize = 20;
const DEFAULT_WEB_TOP_K: usize = 5;

fn saved_line(name: &str, count: usize, overwrote: bool) -> String {
    let verb = if overwrote { "Overwrote" } else { "Saved" };
    format!("\n{verb} subset \"{name}\" with {count} photos.")
}

fn check_save_name(name: Option<&str>) -> Result<(), ToolError> {
    name.map_or(Ok(()), SubsetRegistry::validate_name)
}

pub fn tool_image_search(
    env: &ToolEnv<'_>,
    registry: &mut SubsetRegistry,
    args: &ImageSearchArgs,
) -> Result<ToolOutput, ToolError> {
    check_save_name(args.save_as.as_deref())?;
    let cue = QueryCue {
        text: args.text.clone().filter(|t| !t.trim().is_empty()),
        photo_ids: args.photos.clone(),
    };
    if let Some(bad) = cue.photo_ids.iter().find(|id| !env.corpus.contains(id)) {
        return Err(ToolError::UnknownPhoto(bad.clone()));
    }
    let query = env.index.fuse_query(&cue, env.embedder)?;
    let scope: Option<Vec<String>> = match &args.search_within {
        None => None,
        Some(name) => {
            let members = registry.resolve(name)?;
            let searchable: Vec<String> = members.iter().filter(|id| env.index.contains(id)).cloned().collect();
            if searchable.is_empty() {
                return Err(ToolError::Search(format!(
                    "subset {name:?} contains no searchable photos"
                )));
            }
            Some(searchable)
        }
    };
    let top_k = args.top_k.unwrap_or(env.default_top_k);
    let hits = env.index.search_topk(&query, top_k, scope.as_deref())?;

    let mut text = format!("Found {} photos", hits.len());
    if let Some(name) = &args.search_within {
        text.push_str(&format!(" within \"{name}\""));
    }
    text.push(':');
    for (i, h) in hits.iter().enumerate() {
        text.push_str(&format!("\n{}. {} (score={:.2})", i + 1, h.photo_id, h.score));
    }
    let ids: Vec<String> = hits.iter().map(|h| h.photo_id.clone()).collect();
    if let Some(name) = &args.save_as {
        let overwrote = registry.save(name, ids, env.corpus)?;
        text.push_str(&saved_line(name, hits.len(), overwrote));
    }
    Ok(ToolOutput::new(
        text,
        json!({"results": hits, "saved_as": args.save_as}),
    ))
}

pub fn tool_get_metadata(env: &ToolEnv<'_>, args: &GetMetadataArgs) -> Result<ToolOutput, ToolError> {
    if args.photos.is_empty() {
        return Err(ToolError::InvalidArgs(
            "`photos` must list at least one photo ID".into(),
        ));
    }
    let records = env
        .corpus
        .get_metadata(&args.photos, args.fields.as_deref(), env.geocoder)?;
    let text = records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes"))
        .collect::<Vec<_>>()
        .join("\n");
    Ok(ToolOutput::new(text, json!({ "records": records })))
}

pub fn tool_filter_metadata(
    env: &ToolEnv<'_>,
    registry: &mut SubsetRegistry,
    args: &FilterMetadataArgs,
) -> Result<ToolOutput, ToolError> {
    check_save_name(args.save_as.as_deref())?;
    let expr = filterdsl::parse(&args.expression).map_err(|e| ToolError::syntax(&args.expression, &e))?;
    let scope = match &args.filter_within {
        Some(name) => Some(registry.resolve(name)?.to_vec()),
        None => None,
    };
    let mut ctx = FilterContext::new(env.aliases, env.geocoder);
    ctx.prepare(&expr, env.corpus);
    let ids = filter_scope(env.corpus, &expr, scope.as_deref(), &ctx);

    let mut text = format!("{} photos match: [{}]", ids.len(), ids.join(", "));
    if ctx.warnings() > 0 {
        text.push_str(&format!(
            "\n({} evaluations lacked the required metadata and were treated as false)",
            ctx.warnings()
        ));
    }
    let count = ids.len();
    let payload = json!({"count": count, "photo_ids": ids, "saved_as": args.save_as});
    if let Some(name) = &args.save_as {
        let overwrote = registry.save(name, ids, env.corpus)?;
        text.push_str(&saved_line(name, count, overwrote));
    }
    Ok(ToolOutput::new(text, payload))
}

fn mime_for(path: &Path) -> &'static str {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("png") => "image/png",
        Some("gif") => "image/gif",
        Some("webp") => "image/webp",
        _ => "image/jpeg",
    }
}

/// An image URL for `image_ref`: remote and data URLs pass through, readable
/// local files are inlined as base64 data URLs.
pub fn resolve_image(image_ref: &str, root: Option<&Path>) -> Option<String> {
    let r = image_ref.trim();
    if r.starts_with("http://") || r.starts_with("https://") || r.starts_with("data:") {
        return Some(r.to_string());
    }
    let path = Path::new(r);
    let path = match root {
        Some(root) if path.is_relative() => root.join(path),
        _ => path.to_path_buf(),
    };
    let bytes = fs::read(&path).ok()?;
    let encoded = base64::engine::general_purpose::STANDARD.encode(bytes);
    Some(format!("data:{};base64,{encoded}", mime_for(&path)))
}

fn describe(env: &ToolEnv<'_>, photo: &Photo) -> String {
    let address = photo
        .resolved_address(env.geocoder)
        .unwrap_or_else(|| ADDRESS_UNAVAILABLE.to_string());
    format!(
        "[{}] {} | time: {} | address: {}",
        photo.photo_id,
        photo.caption.as_deref().unwrap_or("(no caption)"),
        photo.time_iso(),
        address
    )
}

pub fn tool_view_photos(env: &ToolEnv<'_>, args: &ViewPhotosArgs) -> Result<ToolOutput, ToolError> {
    if args.photos.is_empty() {
        return Err(ToolError::InvalidArgs(
            "`photos` must list at least one photo ID".into(),
        ));
    }
    if args.photos.len() > VIEW_LIMIT {
        return Err(ToolError::TooManyPhotos);
    }
    let photos = args
        .photos
        .iter()
        .map(|id| env.corpus.photo(id))
        .collect::<Result<Vec<_>, _>>()?;
    let attachments: Vec<Attachment> = photos
        .iter()
        .map(|p| {
            let image = env
                .images
                .then_some(p.image_ref.as_deref())
                .flatten()
                .and_then(|r| resolve_image(r, env.image_root));
            match image {
                Some(url) => Attachment::Image {
                    photo_id: p.photo_id.clone(),
                    url,
                },
                None => Attachment::Text {
                    photo_id: p.photo_id.clone(),
                    text: describe(env, p),
                },
            }
        })
        .collect();
    let mut out = ToolOutput::new(
        format!("Showing {} photos: [{}]", photos.len(), args.photos.join(", ")),
        json!({ "photo_ids": args.photos }),
    );
    out.attachments = attachments;
    Ok(out)
}

pub fn tool_web_search(env: &ToolEnv<'_>, args: &WebSearchArgs) -> Result<ToolOutput, ToolError> {
    let query = args.query.trim();
    if query.is_empty() {
        return Err(ToolError::InvalidArgs("`query` must be non-empty".into()));
    }
    let client = env.search.ok_or_else(|| {
        ToolError::Unavailable(
            "WebSearch",
            "no search client is configured; continue with the other tools".into(),
        )
    })?;
    let top_k = args.top_k.unwrap_or(DEFAULT_WEB_TOP_K);
    let mut results = client.search(query, top_k)?;
    results.truncate(top_k);
    let text = if results.is_empty() {
        "No web results.".to_string()
    } else {
        results
            .iter()
            .map(|r| format!("{}. {}\n   {}\n   {}", r.rank, r.title, r.snippet, r.url))
            .collect::<Vec<_>>()
            .join("\n")
    };
    Ok(ToolOutput::new(text, json!({ "results": results })))
}

/// Compress the session context; the registry is not involved.
pub fn compress_memory(
    memory: &mut ContextMemory,
    summarizer: Option<&dyn Summarizer>,
) -> Result<(ToolOutput, CompressionEvent), ToolError> {
    let summarizer =
        summarizer.ok_or_else(|| ToolError::Unavailable("CompressMemory", "no summarizer is configured".into()))?;
    let event = memory.compress(summarizer)?;
    let out = ToolOutput::new(
        format!(
            "Memory compressed: {} -> {} tokens.",
            event.tokens_before, event.tokens_after
        ),
        json!({"tokens_before": event.tokens_before, "tokens_after": event.tokens_after}),
    );
    Ok((out, event))
}
