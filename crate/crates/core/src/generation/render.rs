use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ascii_normalize, Draft, DraftBody, DraftSection};
use crate::ingest::SectionKind;

pub const HIGHLIGHTS_HEADING: &str = "Tailored Highlights (not part of resume)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenderFormat {
    Txt,
    Html,
    Markdown,
}

impl RenderFormat {
    pub const ALL: [RenderFormat; 3] = [
        RenderFormat::Txt,
        RenderFormat::Html,
        RenderFormat::Markdown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RenderFormat::Txt => "txt",
            RenderFormat::Html => "html",
            RenderFormat::Markdown => "markdown",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            RenderFormat::Txt => "txt",
            RenderFormat::Html => "html",
            RenderFormat::Markdown => "md",
        }
    }
}

impl FromStr for RenderFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "txt" | "text" => Ok(RenderFormat::Txt),
            "html" => Ok(RenderFormat::Html),
            "markdown" | "md" => Ok(RenderFormat::Markdown),
            other => Err(format!(
                "unknown render format {other:?} (expected txt, html or markdown)"
            )),
        }
    }
}

fn rank(kind: SectionKind) -> u8 {
    match kind {
        SectionKind::Summary => 0,
        SectionKind::Skills => 1,
        SectionKind::Experience => 2,
        SectionKind::Education => 3,
        SectionKind::Projects => 4,
        SectionKind::Other => 5,
    }
}

fn ordered(draft: &Draft) -> Vec<&DraftSection> {
    let mut sections: Vec<&DraftSection> =
        draft.sections.iter().filter(|s| !s.is_empty()).collect();
    sections.sort_by_key(|s| rank(s.kind));
    sections
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

fn txt(draft: &Draft) -> String {
    let mut out = String::new();
    if let Some(name) = &draft.name {
        out.push_str(name);
        out.push_str("\n\n");
    }
    for section in ordered(draft) {
        out.push_str(&section.heading.to_uppercase());
        out.push('\n');
        match &section.body {
            DraftBody::Lines(lines) => {
                for line in lines {
                    out.push_str(line);
                    out.push('\n');
                }
            }
            DraftBody::Entries(entries) => {
                for (i, e) in entries.iter().enumerate() {
                    if i > 0 {
                        out.push('\n');
                    }
                    out.push_str(&e.header_line());
                    out.push('\n');
                    for b in e.bullets() {
                        let _ = writeln!(out, "- {}", b.text);
                    }
                }
            }
        }
        out.push('\n');
    }
    let trimmed = out.trim_end().to_string() + "\n";
    ascii_normalize(&trimmed).text
}

fn html(draft: &Draft) -> String {
    let title = draft.name.as_deref().unwrap_or("Resume");
    let mut out =
        String::from("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    let _ = writeln!(out, "<title>{}</title>\n</head>\n<body>", escape(title));
    if let Some(name) = &draft.name {
        let _ = writeln!(out, "<h1>{}</h1>", escape(name));
    }
    for section in ordered(draft) {
        let _ = writeln!(out, "<section class=\"{}\">", section.kind.as_str());
        let _ = writeln!(out, "<h2>{}</h2>", escape(&section.heading));
        match &section.body {
            DraftBody::Lines(lines) => {
                for line in lines {
                    let _ = writeln!(out, "<p>{}</p>", escape(line));
                }
            }
            DraftBody::Entries(entries) => {
                for e in entries {
                    out.push_str("<div class=\"entry\">\n");
                    let _ = writeln!(out, "<h3>{}</h3>", escape(&e.header_line()));
                    out.push_str("<ul>\n");
                    for b in e.bullets() {
                        let _ = writeln!(out, "<li>{}</li>", escape(&b.text));
                    }
                    out.push_str("</ul>\n</div>\n");
                }
            }
        }
        out.push_str("</section>\n");
    }
    out.push_str("</body>\n</html>\n");
    out
}

/// Resume body plus a separated appendix of highlights with provenance labels.
fn review_bundle(draft: &Draft) -> String {
    let mut out = String::new();
    if let Some(name) = &draft.name {
        let _ = writeln!(out, "# {name}\n");
    }
    for section in ordered(draft) {
        let _ = writeln!(out, "## {}", section.heading);
        match &section.body {
            DraftBody::Lines(lines) => {
                for line in lines {
                    out.push_str(line);
                    out.push('\n');
                }
            }
            DraftBody::Entries(entries) => {
                for e in entries {
                    let _ = writeln!(out, "### {}", e.header_line());
                    for b in e.bullets() {
                        let _ = writeln!(out, "- {} <!-- {} -->", b.text, b.provenance.label());
                    }
                }
            }
        }
        out.push('\n');
    }
    out.push_str("---\n\n");
    let _ = writeln!(out, "## {HIGHLIGHTS_HEADING}\n");
    if draft.tailored_highlights.is_empty() {
        out.push_str("_none_\n");
    }
    for h in &draft.tailored_highlights {
        let tier = match h.tier {
            Some(t) => format!("tier {t}"),
            None => "unplaced vault".to_string(),
        };
        let _ = write!(out, "- [{tier} | {}] {}", h.provenance.label(), h.text);
        if !h.target_elements.is_empty() {
            let _ = write!(out, " (targets: {})", h.target_elements.join(", "));
        }
        out.push('\n');
    }
    out
}

/// Deterministic rendering. Highlights appear only in the markdown bundle.
pub fn render(draft: &Draft, format: RenderFormat) -> String {
    match format {
        RenderFormat::Txt => txt(draft),
        RenderFormat::Html => html(draft),
        RenderFormat::Markdown => review_bundle(draft),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generation::{assemble, FallbackItem, Provenance, ProvenanceTag};
    use crate::ingest::{parse_resume_text, DocFormat};

    fn draft() -> Draft {
        let base = parse_resume_text(
            "# Pat Doe\n## Education\nBSc Math\n## Experience\n### Acme \u{2014} Analyst (2020)\n- Built <KPI> reports\n## Summary\nAnalyst.\n",
            DocFormat::Markdown,
        )
        .unwrap();
        let items = (1..=2)
            .map(|i| FallbackItem {
                item_id: format!("f0{i}"),
                tier: 3,
                text: format!("Prepared to take ownership of: highlight number {i}."),
                provenance: Provenance::fallback(ProvenanceTag::FallbackTemplate),
                target_elements: vec![format!("e0{i}")],
                employer: None,
                confidence: None,
            })
            .collect();
        assemble(&base, "t", vec![], items, "").unwrap()
    }

    #[test]
    fn txt_excludes_highlights_and_orders_sections() {
        let t = render(&draft(), RenderFormat::Txt);
        assert!(!t.contains("highlight number"));
        let s = t.find("SUMMARY").unwrap();
        let x = t.find("EXPERIENCE").unwrap();
        let e = t.find("EDUCATION").unwrap();
        assert!(s < x && x < e);
        assert!(t.contains("Acme -- Analyst (2020)"));
        assert!(t.is_ascii());
    }

    #[test]
    fn html_escapes_and_excludes_highlights() {
        let h = render(&draft(), RenderFormat::Html);
        assert!(h.contains("Built &lt;KPI&gt; reports"));
        assert!(!h.contains("highlight number"));
    }

    #[test]
    fn bundle_has_appendix_with_tiers() {
        let m = render(&draft(), RenderFormat::Markdown);
        let at = m.find(HIGHLIGHTS_HEADING).unwrap();
        let first = m.find("highlight number 1").unwrap();
        assert!(first > at);
        assert!(m.contains("[tier 3 | fallback_template]"));
    }

    #[test]
    fn deterministic() {
        let d = draft();
        for f in RenderFormat::ALL {
            assert_eq!(render(&d, f), render(&d, f));
        }
    }
}
