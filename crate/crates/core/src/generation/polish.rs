use super::{ascii_normalize, Draft, DraftBody};
use crate::matcher::partial_ratio;

pub const DEDUPE_THRESHOLD: f64 = 90.0;

fn norm(s: &mut String) {
    let out = ascii_normalize(s).text;
    *s = out;
}

/// Dedupes bullets within each entry, orders them by retrieval confidence
/// (unscored bullets after, in original order) and ASCII-normalizes all text.
pub fn polish(draft: &Draft) -> Draft {
    let mut out = draft.clone();
    for entry in out.entries_mut() {
        let texts: Vec<String> = entry.bullets().iter().map(|b| b.text.clone()).collect();
        let mut keep = vec![true; texts.len()];
        for i in 0..texts.len() {
            if !keep[i] {
                continue;
            }
            for j in i + 1..texts.len() {
                if keep[j] && partial_ratio(&texts[i], &texts[j]) >= DEDUPE_THRESHOLD {
                    keep[j] = false;
                }
            }
        }
        let mut idx = 0;
        entry.retain(|_| {
            let k = keep[idx];
            idx += 1;
            k
        });
        let mut order: Vec<usize> = (0..entry.bullets().len()).collect();
        let conf: Vec<Option<f64>> = entry.bullets().iter().map(|b| b.confidence).collect();
        order.sort_by(|&a, &b| match (conf[a], conf[b]) {
            (Some(x), Some(y)) => y.total_cmp(&x),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        });
        entry.reorder(&order);
        entry.edit_texts(|_, t| norm(t));
        norm(&mut entry.employer);
        norm(&mut entry.title);
        norm(&mut entry.date_range);
    }
    for section in out.sections.iter_mut() {
        norm(&mut section.heading);
        if let DraftBody::Lines(lines) = &mut section.body {
            lines.iter_mut().for_each(norm);
        }
    }
    for h in out.tailored_highlights.iter_mut() {
        norm(&mut h.text);
    }
    if let Some(name) = out.name.as_mut() {
        norm(name);
    }
    norm(&mut out.summary_text);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generation::{assemble, DraftBullet, Provenance};
    use crate::ingest::{parse_resume_text, DocFormat};
    use crate::vault::VaultProvenance;

    fn vb(id: &str, text: &str, conf: f64) -> (DraftBullet, Option<String>) {
        (
            DraftBullet {
                item_id: id.into(),
                text: text.into(),
                provenance: Provenance::vault(VaultProvenance::VaultResume, "h", id),
                confidence: Some(conf),
                matched_elements: vec![],
            },
            Some("Acme".into()),
        )
    }

    fn texts(d: &Draft) -> Vec<String> {
        d.entry_texts().into_iter().map(str::to_string).collect()
    }

    #[test]
    fn identical_bullets_collapse_and_order_by_confidence() {
        let base = parse_resume_text(
            "## Experience\n### Acme \u{2014} Analyst (2020)\n- Built \u{201C}KPI\u{201D} reports\n",
            DocFormat::Markdown,
        )
        .unwrap();
        let d = assemble(
            &base,
            "t",
            vec![
                vb("v01", "Ran audits", 0.76),
                vb("v02", "Led migration", 0.9),
                vb("v03", "Led migration", 0.8),
            ],
            vec![],
            "",
        )
        .unwrap();
        let p = polish(&d);
        assert_eq!(
            texts(&p),
            ["Led migration", "Ran audits", "Built \"KPI\" reports"]
        );
    }

    #[test]
    fn below_threshold_both_remain() {
        let a = "abcdefghij";
        let b = "abcdefghxy";
        assert!(partial_ratio(a, b) < DEDUPE_THRESHOLD);
        let base = parse_resume_text(
            &format!("## Experience\n### Acme\n- {a}\n- {b}\n"),
            DocFormat::Markdown,
        )
        .unwrap();
        let d = assemble(&base, "t", vec![], vec![], "").unwrap();
        assert_eq!(polish(&d).entry_texts().len(), 2);
    }
}
