use super::AgentConfig;
use crate::toolkit::ToolName;

pub const ANSWER_PHRASE: &str = "The final answer is:";
pub const ANSWER_FORMAT: &str = "The final answer is: [photo_id1, photo_id2, ...].";

/// System prompt advertising exactly the tools enabled in `config`.
pub fn build_system_prompt(config: &AgentConfig) -> String {
    let tools = config.effective_tools();
    let mut p = String::new();
    p.push_str(
        "You are an image retrieval agent working over one user's personal photo collection. \
Each photo has an ID, a capture time and usually an address. \
The user describes the photos they want in terms of their own experiences; \
find exactly the set of photos the query refers to.\n\n",
    );
    p.push_str("## Query decomposition\n");
    p.push_str("Before searching, decompose the query into three components:\n");
    p.push_str(
        "- Episode: the latent spatiotemporal context implied by the query, such as a trip, an event or a day out.\n",
    );
    p.push_str(
        "- Episode Breakdown: the concrete anchors that locate the episode, such as a recognizable scene, an object, a date or a place, and how they relate to each other.\n",
    );
    p.push_str("- Target: the photos that must be returned, and the constraints that identify them.\n\n");

    p.push_str("## Guidelines\n");
    p.push_str(
        "1. Anchors locate the episode; they do not describe the target. Do not assume the target photos share the visual features of the anchor photos.\n",
    );
    p.push_str(
        "2. Temporal phrases such as \"the next day\" or \"on the same trip\" constrain time or location; use them to narrow the candidate photos rather than as visual descriptions.\n",
    );
    p.push_str(
        "3. Act autonomously. Never ask the user for clarification; resolve ambiguity yourself with the available tools.\n",
    );
    p.push_str(&format!(
        "4. When you are done, state your answer exactly in this format: {ANSWER_FORMAT}\n   Use an empty list if no photo matches.\n\n"
    ));

    p.push_str("## Tools\n");
    if tools.iter().next().is_none() {
        p.push_str("No tools are available in this session.\n");
    }
    for t in tools.iter() {
        p.push_str(&format!("- {}: {}\n", t.as_str(), t.description()));
    }
    let scoped = tools.contains(ToolName::ImageSearch) || tools.contains(ToolName::FilterMetadata);
    if config.explicit_memory && scoped {
        p.push_str(
            "\nResults can be saved as named subsets (save_as) and later searched or filtered within (search_within, filter_within). \
Chaining a filter inside a saved subset intersects the two constraints.\n",
        );
    }
    p
}

/// Ids listed after the last well-formed answer phrase.
pub fn extract_final_answer(text: &str) -> Option<Vec<String>> {
    let mut end = text.len();
    while let Some(at) = text[..end].rfind(ANSWER_PHRASE) {
        if let Some(ids) = parse_bracket_list(&text[at + ANSWER_PHRASE.len()..]) {
            return Some(ids);
        }
        end = at;
    }
    None
}

fn parse_bracket_list(rest: &str) -> Option<Vec<String>> {
    let rest = rest.trim_start_matches(|c: char| c.is_whitespace() || c == '*' || c == '`');
    let inner = rest.strip_prefix('[')?;
    let close = inner.find(']')?;
    Some(
        inner[..close]
            .split(',')
            .map(|s| s.trim().trim_matches(|c| c == '"' || c == '\'' || c == '`').trim())
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect(),
    )
}
