use serde_json::{json, Map, Value};

use super::{ToolName, ToolSet, VIEW_LIMIT};
use crate::chat::ToolSchema;

fn object(props: Vec<(&str, Value)>, required: &[&str]) -> Value {
    let properties: Map<String, Value> = props.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    json!({"type": "object", "properties": properties, "required": required})
}

fn id_list(description: &str) -> Value {
    json!({"type": "array", "items": {"type": "string"}, "description": description})
}

fn parameters(tool: ToolName, explicit_memory: bool) -> Value {
    let mut props = Vec::new();
    let required: &[&str];
    match tool {
        ToolName::ImageSearch => {
            props.push(("text", json!({"type": "string", "description": "Text query."})));
            props.push(("photos", id_list("Reference photo IDs used as visual queries.")));
            props.push((
                "top_k",
                json!({"type": "integer", "minimum": 1, "description": "Number of results (default: 20)."}),
            ));
            if explicit_memory {
                props.push((
                    "save_as",
                    json!({"type": "string", "description": "Save the result IDs under this subset name."}),
                ));
                props.push((
                    "search_within",
                    json!({"type": "string", "description": "Only search inside this saved subset."}),
                ));
            }
            required = &[];
        }
        ToolName::GetMetadata => {
            props.push(("photos", id_list("Photo IDs to describe.")));
            props.push((
                "fields",
                json!({"type": "array", "items": {"type": "string", "enum": ["time", "address"]},
                       "description": "Metadata fields to return (default: both)."}),
            ));
            required = &["photos"];
        }
        ToolName::FilterMetadata => {
            props.push((
                "expression",
                json!({"type": "string", "description": "Boolean filter, e.g. time.year == 2012 and match_address(address, \"Paris\")."}),
            ));
            if explicit_memory {
                props.push((
                    "save_as",
                    json!({"type": "string", "description": "Save the matching IDs under this subset name."}),
                ));
                props.push((
                    "filter_within",
                    json!({"type": "string", "description": "Only filter inside this saved subset."}),
                ));
            }
            required = &["expression"];
        }
        ToolName::ViewPhotos => {
            let mut photos = id_list("Photo IDs to view.");
            photos["maxItems"] = json!(VIEW_LIMIT);
            props.push(("photos", photos));
            required = &["photos"];
        }
        ToolName::WebSearch => {
            props.push(("query", json!({"type": "string", "description": "Search query."})));
            props.push((
                "top_k",
                json!({"type": "integer", "minimum": 1, "description": "Number of results."}),
            ));
            required = &["query"];
        }
        ToolName::CompressMemory => required = &[],
    }
    object(props, required)
}

/// Function declarations for the enabled tools, in canonical tool order.
///
/// With explicit memory off, subset parameters are not advertised.
pub fn tool_schemas(enabled: &ToolSet, explicit_memory: bool) -> Vec<ToolSchema> {
    ToolName::ALL
        .into_iter()
        .filter(|t| enabled.contains(*t))
        .map(|t| ToolSchema {
            name: t.as_str().to_string(),
            description: t.description().to_string(),
            parameters: parameters(t, explicit_memory),
        })
        .collect()
}
