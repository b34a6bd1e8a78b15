use serde::{Deserialize, Serialize};

use super::{DraftBullet, Provenance};
use crate::gateway::{ChatMessage, ChatRequest, ChatTask, ConstraintBlock, Gateway, Usage};
use crate::jd::JdAnalysis;
use crate::vault::VaultProvenance;

pub(crate) const NO_FABRICATION: [&str; 3] = [
    "Do not introduce employers, organizations, roles or job titles that are not in the source text.",
    "Do not introduce numbers, percentages, currency amounts or performance metrics that are not in the source text.",
    "Keep the statement truthful to the source; rephrase only.",
];

/// A vault snippet together with the text and source labels needed downstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedSnippet {
    pub chunk_id: String,
    pub doc_id: String,
    pub text: String,
    pub employer: Option<String>,
    pub provenance: VaultProvenance,
    pub confidence: f64,
    pub matched_elements: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RewriteOutcome {
    pub bullets: Vec<(DraftBullet, Option<String>)>,
    /// Snippets passed through verbatim because the gateway failed.
    pub passthrough: Vec<String>,
    pub usage: Usage,
}

fn focus_line(jd: &JdAnalysis, ids: &[String]) -> String {
    let texts: Vec<&str> = ids
        .iter()
        .filter_map(|id| jd.element(id))
        .map(|e| e.text.as_str())
        .collect();
    format!(
        "Target role: {}\nRelevant requirements: {}",
        jd.role_title.as_deref().unwrap_or("unspecified"),
        texts.join("; ")
    )
}

/// Rewrites each kept snippet toward the JD. Gateway failures fall back to the
/// snippet text unchanged; provenance always comes from the snippet.
pub fn rewrite_snippets(
    snippets: &[RetrievedSnippet],
    jd: &JdAnalysis,
    gateway: &dyn Gateway,
    seed: u64,
    feedback: Option<&str>,
) -> RewriteOutcome {
    let mut out = RewriteOutcome::default();
    for (i, s) in snippets.iter().enumerate() {
        let mut prompt = focus_line(jd, &s.matched_elements);
        if let Some(f) = feedback {
            prompt.push_str("\nReviewer feedback: ");
            prompt.push_str(f);
        }
        prompt.push_str("\nRewrite this resume bullet:\n");
        prompt.push_str(&s.text);
        let request = ChatRequest {
            task: ChatTask::Rewrite,
            messages: vec![
                ChatMessage::system("You tailor resume bullets to a job description."),
                ChatMessage::user(prompt),
            ],
            constraints: Some(ConstraintBlock {
                rules: NO_FABRICATION.iter().map(|r| r.to_string()).collect(),
                response_schema: "one plain-text bullet".into(),
            }),
            snippet: Some(s.text.clone()),
            seed,
        };
        let text = match gateway.chat(&request) {
            Ok(r) if !r.text.trim().is_empty() => {
                out.usage.prompt_tokens += r.usage.prompt_tokens;
                out.usage.completion_tokens += r.usage.completion_tokens;
                r.text.trim().to_string()
            }
            Ok(_) => {
                out.passthrough.push(s.chunk_id.clone());
                s.text.clone()
            }
            Err(e) => {
                log::warn!("rewrite of {} failed, passing through: {e}", s.chunk_id);
                out.passthrough.push(s.chunk_id.clone());
                s.text.clone()
            }
        };
        out.bullets.push((
            DraftBullet {
                item_id: format!("v{:02}", i + 1),
                text,
                provenance: Provenance::vault(s.provenance, &s.doc_id, &s.chunk_id),
                confidence: Some(s.confidence),
                matched_elements: s.matched_elements.clone(),
            },
            s.employer.clone(),
        ));
    }
    out
}

/// Produces the summary text. Falls back to `base_summary` on any failure.
pub fn summarize(
    base_summary: &str,
    jd: &JdAnalysis,
    gateway: &dyn Gateway,
    seed: u64,
) -> (String, Option<String>, Usage) {
    if base_summary.trim().is_empty() {
        return (String::new(), None, Usage::default());
    }
    let request = ChatRequest {
        task: ChatTask::Summary,
        messages: vec![
            ChatMessage::system("You write resume summaries."),
            ChatMessage::user(format!(
                "Target role: {}\nRewrite this summary for the role:\n{base_summary}",
                jd.role_title.as_deref().unwrap_or("unspecified")
            )),
        ],
        constraints: Some(ConstraintBlock {
            rules: NO_FABRICATION.iter().map(|r| r.to_string()).collect(),
            response_schema: "one plain-text paragraph".into(),
        }),
        snippet: Some(base_summary.to_string()),
        seed,
    };
    match gateway.chat(&request) {
        Ok(r) if !r.text.trim().is_empty() => (r.text.trim().to_string(), None, r.usage),
        Ok(_) => (
            base_summary.to_string(),
            Some("empty summary response".into()),
            Usage::default(),
        ),
        Err(e) => (
            base_summary.to_string(),
            Some(e.to_string()),
            Usage::default(),
        ),
    }
}
