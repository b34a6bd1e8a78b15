use super::{
    Draft, DraftBody, DraftBullet, DraftEntry, DraftSection, FallbackItem, GenerationError,
    Highlight, Provenance,
};
use crate::ingest::{fold, ResumeDoc, SectionBody, SectionKind};

/// Builds the draft from the base resume.
///
/// Vault bullets join the entry whose employer matches after folding; anything
/// unplaced, and every fallback item, lands in `tailored_highlights`.
pub fn assemble(
    base: &ResumeDoc,
    base_doc_id: &str,
    rewritten: Vec<(DraftBullet, Option<String>)>,
    fallback: Vec<FallbackItem>,
    summary_text: &str,
) -> Result<Draft, GenerationError> {
    let mut sections = Vec::with_capacity(base.sections.len());
    for (i, section) in base.sections.iter().enumerate() {
        let body = match &section.body {
            SectionBody::Entries(entries) => {
                let mut out = Vec::with_capacity(entries.len());
                for (j, e) in entries.iter().enumerate() {
                    let mut entry =
                        DraftEntry::new(e.employer.clone(), e.title.clone(), e.date_range.clone());
                    for (k, text) in e.bullets.iter().enumerate() {
                        entry.push(DraftBullet {
                            item_id: format!("t{i}.{j}.{k}"),
                            text: text.clone(),
                            provenance: Provenance::target(
                                base_doc_id,
                                Some(format!("{base_doc_id}/s{i}/e{j}/b{k}")),
                            ),
                            confidence: None,
                            matched_elements: Vec::new(),
                        })?;
                    }
                    out.push(entry);
                }
                DraftBody::Entries(out)
            }
            SectionBody::Lines(lines) => {
                if section.kind == SectionKind::Summary && !summary_text.trim().is_empty() {
                    DraftBody::Lines(vec![summary_text.trim().to_string()])
                } else {
                    DraftBody::Lines(lines.clone())
                }
            }
        };
        sections.push(DraftSection {
            kind: section.kind,
            heading: section.heading.clone(),
            body,
        });
    }

    let mut draft = Draft {
        name: base.name.clone(),
        sections,
        tailored_highlights: Vec::new(),
        summary_text: summary_text.trim().to_string(),
    };

    for (bullet, employer) in rewritten {
        let key = employer.as_deref().map(fold);
        let target = key
            .as_ref()
            .and_then(|k| draft.entries_mut().find(|e| fold(&e.employer) == *k));
        match target {
            Some(entry) if !bullet.provenance.tag.is_fallback() => entry.push(bullet)?,
            _ => draft.tailored_highlights.push(Highlight {
                item_id: bullet.item_id,
                tier: None,
                text: bullet.text,
                provenance: bullet.provenance,
                target_elements: bullet.matched_elements,
                employer,
            }),
        }
    }
    for item in fallback {
        draft.tailored_highlights.push(Highlight {
            item_id: item.item_id,
            tier: Some(item.tier),
            text: item.text,
            provenance: item.provenance,
            target_elements: item.target_elements,
            employer: item.employer,
        });
    }
    draft.check_merge_exclusion()?;
    Ok(draft)
}
