use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::rewrite::NO_FABRICATION;
use super::{Provenance, ProvenanceTag, RetrievedSnippet};
use crate::gateway::{ChatMessage, ChatRequest, ChatTask, ConstraintBlock, Gateway, Usage};
use crate::jd::{ElementCategory, JdElement};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FallbackConfig {
    pub tau: f64,
    pub tau_fallback: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FallbackItem {
    pub item_id: String,
    pub tier: u8,
    pub text: String,
    pub provenance: Provenance,
    pub target_elements: Vec<String>,
    #[serde(default)]
    pub employer: Option<String>,
    #[serde(default)]
    pub confidence: Option<f64>,
}

/// Deterministic tier-3 text for an element.
pub fn template_text(element: &JdElement) -> String {
    let text = element.text.trim().trim_end_matches('.');
    match element.category {
        ElementCategory::Skill => format!("Skills aligned with this role include: {text}."),
        ElementCategory::Responsibility => format!("Prepared to take ownership of: {text}."),
        ElementCategory::Qualification => {
            format!("Meets or is actively developing toward: {text}.")
        }
    }
}

fn generate(
    element: &JdElement,
    gateway: &dyn Gateway,
    seed: u64,
) -> Result<(String, Usage), String> {
    let request = ChatRequest {
        task: ChatTask::Fallback,
        messages: vec![
            ChatMessage::system(
                "You write one neutral resume highlight addressing a job requirement.",
            ),
            ChatMessage::user(format!(
                "Requirement ({}): {}\nWrite one highlight:\n{}",
                element.category.as_str(),
                element.text,
                element.text
            )),
        ],
        constraints: Some(ConstraintBlock {
            rules: NO_FABRICATION.iter().map(|r| r.to_string()).collect(),
            response_schema: "one plain-text highlight".into(),
        }),
        snippet: Some(element.text.clone()),
        seed,
    };
    let resp = gateway.chat(&request).map_err(|e| e.to_string())?;
    let text = resp.text.trim().to_string();
    if text.is_empty() {
        return Err("empty fallback response".into());
    }
    Ok((text, resp.usage))
}

/// Three-tier fallback for elements no kept snippet covers.
///
/// `candidates` are scored vault snippets that failed the main threshold. Tier 1
/// takes the best of them inside `[tau_fallback, tau)`; tier 2 asks the gateway
/// (when given); tier 3 always succeeds with a template.
pub fn fallback_for(
    uncovered: &[JdElement],
    candidates: &[RetrievedSnippet],
    gateway: Option<&dyn Gateway>,
    config: &FallbackConfig,
) -> (Vec<FallbackItem>, Usage) {
    let mut items: Vec<FallbackItem> = Vec::new();
    let mut by_chunk: HashMap<String, usize> = HashMap::new();
    let mut usage = Usage::default();
    for element in uncovered {
        let best = candidates
            .iter()
            .filter(|s| s.matched_elements.contains(&element.element_id))
            .filter(|s| s.confidence >= config.tau_fallback && s.confidence < config.tau)
            .max_by(|a, b| {
                a.confidence
                    .total_cmp(&b.confidence)
                    .then_with(|| b.chunk_id.cmp(&a.chunk_id))
            });
        if let Some(s) = best {
            if let Some(&i) = by_chunk.get(&s.chunk_id) {
                items[i].target_elements.push(element.element_id.clone());
                continue;
            }
            by_chunk.insert(s.chunk_id.clone(), items.len());
            items.push(FallbackItem {
                item_id: String::new(),
                tier: 1,
                text: s.text.clone(),
                provenance: Provenance::vault(s.provenance, &s.doc_id, &s.chunk_id),
                target_elements: vec![element.element_id.clone()],
                employer: s.employer.clone(),
                confidence: Some(s.confidence),
            });
            continue;
        }
        if let Some(gw) = gateway {
            match generate(element, gw, config.seed) {
                Ok((text, u)) => {
                    usage.prompt_tokens += u.prompt_tokens;
                    usage.completion_tokens += u.completion_tokens;
                    items.push(FallbackItem {
                        item_id: String::new(),
                        tier: 2,
                        text,
                        provenance: Provenance::fallback(ProvenanceTag::FallbackLlm),
                        target_elements: vec![element.element_id.clone()],
                        employer: None,
                        confidence: None,
                    });
                    continue;
                }
                Err(e) => log::warn!("tier-2 fallback for {} failed: {e}", element.element_id),
            }
        }
        items.push(FallbackItem {
            item_id: String::new(),
            tier: 3,
            text: template_text(element),
            provenance: Provenance::fallback(ProvenanceTag::FallbackTemplate),
            target_elements: vec![element.element_id.clone()],
            employer: None,
            confidence: None,
        });
    }
    for (i, item) in items.iter_mut().enumerate() {
        item.item_id = format!("f{:02}", i + 1);
    }
    (items, usage)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{MockGateway, MockMode};
    use crate::vault::VaultProvenance;

    fn element(id: &str, category: ElementCategory, text: &str) -> JdElement {
        JdElement {
            element_id: id.into(),
            category,
            text: text.into(),
            source_line: 1,
        }
    }

    fn candidate(id: &str, conf: f64, elements: &[&str]) -> RetrievedSnippet {
        RetrievedSnippet {
            chunk_id: id.into(),
            doc_id: "hist".into(),
            text: format!("text {id}"),
            employer: Some("Acme".into()),
            provenance: VaultProvenance::VaultCareerRecord,
            confidence: conf,
            matched_elements: elements.iter().map(|s| s.to_string()).collect(),
        }
    }

    const CFG: FallbackConfig = FallbackConfig {
        tau: 0.75,
        tau_fallback: 0.60,
        seed: 42,
    };

    #[test]
    fn tier_one_band() {
        let el = element("e01", ElementCategory::Responsibility, "Own reporting");
        let (items, _) = fallback_for(&[el], &[candidate("c1", 0.70, &["e01"])], None, &CFG);
        assert_eq!(items[0].tier, 1);
        assert_eq!(items[0].provenance.tag, ProvenanceTag::VaultCareerRecord);
        assert_eq!(items[0].provenance.source_chunk.as_deref(), Some("c1"));
    }

    #[test]
    fn below_band_goes_to_template() {
        let el = element("e01", ElementCategory::Skill, "Tableau");
        let (items, _) = fallback_for(&[el], &[candidate("c1", 0.59, &["e01"])], None, &CFG);
        assert_eq!(items[0].tier, 3);
        assert_eq!(
            items[0].text,
            "Skills aligned with this role include: Tableau."
        );
        assert_eq!(
            items[0].provenance,
            Provenance::fallback(ProvenanceTag::FallbackTemplate)
        );
    }

    #[test]
    fn templates_per_category() {
        let r = element("e", ElementCategory::Responsibility, "Build dashboards");
        let q = element("e", ElementCategory::Qualification, "5 years SQL.");
        assert_eq!(
            template_text(&r),
            "Prepared to take ownership of: Build dashboards."
        );
        assert_eq!(
            template_text(&q),
            "Meets or is actively developing toward: 5 years SQL."
        );
    }

    #[test]
    fn tier_two_then_three_on_failure() {
        let el = element("e01", ElementCategory::Skill, "Tableau");
        let up = MockGateway::new(MockMode::IdentityRewrite, 42, 64);
        let (items, _) = fallback_for(std::slice::from_ref(&el), &[], Some(&up), &CFG);
        assert_eq!(items[0].tier, 2);
        assert_eq!(items[0].provenance.tag, ProvenanceTag::FallbackLlm);
        let down = MockGateway::new(MockMode::Offline, 42, 64);
        let (items, _) = fallback_for(&[el], &[], Some(&down), &CFG);
        assert_eq!(items[0].tier, 3);
    }

    #[test]
    fn shared_tier_one_chunk_merges_targets() {
        let a = element("e01", ElementCategory::Skill, "SQL");
        let b = element("e02", ElementCategory::Skill, "Excel");
        let (items, _) = fallback_for(
            &[a, b],
            &[candidate("c1", 0.65, &["e01", "e02"])],
            None,
            &CFG,
        );
        assert_eq!(items.len(), 1);
        assert_eq!(items[0].target_elements, vec!["e01", "e02"]);
    }
}
