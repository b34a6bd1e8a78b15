use std::sync::LazyLock;

use regex::Regex;

use super::{
    DocFormat, ExperienceEntry, IngestError, ResumeDoc, Section, SectionBody, SectionKind,
};

static ENTRY_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?P<employer>.+?)\s+(?:—|–|--|-)\s+(?P<title>.+?)\s*\((?P<dates>[^()]*)\)\s*$")
        .unwrap()
});

static ENTRY_HEADING_NO_DATES: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?P<employer>.+?)\s+(?:—|–|--|-)\s+(?P<title>.+)$").unwrap());

static BULLET: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:[-*•]|\d{1,3}[.)])\s+(?P<text>.*)$").unwrap());

pub(crate) fn strip_bullet(line: &str) -> Option<&str> {
    BULLET
        .captures(line)
        .map(|c| c.name("text").map_or("", |m| m.as_str()).trim())
}

fn parse_entry_line(line: &str) -> Option<ExperienceEntry> {
    ENTRY_LINE.captures(line).map(|c| ExperienceEntry {
        employer: c["employer"].trim().to_string(),
        title: c["title"].trim().to_string(),
        date_range: c["dates"].trim().to_string(),
        bullets: Vec::new(),
    })
}

fn parse_entry_heading(text: &str) -> ExperienceEntry {
    if let Some(entry) = parse_entry_line(text) {
        return entry;
    }
    if let Some(c) = ENTRY_HEADING_NO_DATES.captures(text) {
        return ExperienceEntry {
            employer: c["employer"].trim().to_string(),
            title: c["title"].trim().to_string(),
            date_range: String::new(),
            bullets: Vec::new(),
        };
    }
    ExperienceEntry {
        employer: text.trim().to_string(),
        title: String::new(),
        date_range: String::new(),
        bullets: Vec::new(),
    }
}

/// Accumulates sections while scanning lines.
struct Builder {
    doc: ResumeDoc,
    active: Option<usize>,
    overflow: Option<usize>,
}

impl Builder {
    fn open_section(&mut self, heading: &str) {
        let mut kind = SectionKind::from_heading(heading);
        if kind == SectionKind::Summary
            && self
                .doc
                .sections
                .iter()
                .any(|s| s.kind == SectionKind::Summary)
        {
            kind = SectionKind::Other;
        }
        let body = if kind == SectionKind::Experience {
            SectionBody::Entries(Vec::new())
        } else {
            SectionBody::Lines(Vec::new())
        };
        self.doc.sections.push(Section {
            kind,
            heading: heading.trim().trim_end_matches(':').trim().to_string(),
            body,
        });
        self.active = Some(self.doc.sections.len() - 1);
        self.overflow = None;
    }

    fn current(&mut self) -> Option<&mut Section> {
        self.active.map(|i| &mut self.doc.sections[i])
    }

    /// Lines that fit nowhere go to an "Other" section; the active section stays open.
    fn push_other_line(&mut self, text: &str) {
        let idx = match (self.active, self.overflow) {
            (Some(a), _) if self.doc.sections[a].kind == SectionKind::Other => a,
            (_, Some(o)) => o,
            _ => {
                self.doc.sections.push(Section {
                    kind: SectionKind::Other,
                    heading: "Other".into(),
                    body: SectionBody::Lines(Vec::new()),
                });
                let o = self.doc.sections.len() - 1;
                if self.active.is_none() {
                    self.active = Some(o);
                } else {
                    self.overflow = Some(o);
                }
                o
            }
        };
        if let SectionBody::Lines(lines) = &mut self.doc.sections[idx].body {
            lines.push(text.to_string());
        }
    }

    /// Routes a content line into the current section.
    fn push_content(&mut self, line: &str) {
        let bullet = strip_bullet(line);
        let text = bullet.unwrap_or(line).trim();
        if text.is_empty() {
            return;
        }
        match self.current().map(|s| &mut s.body) {
            Some(SectionBody::Entries(entries)) => {
                if bullet.is_none() {
                    if let Some(entry) = parse_entry_line(text) {
                        entries.push(entry);
                        return;
                    }
                }
                match entries.last_mut() {
                    Some(entry) => entry.bullets.push(text.to_string()),
                    None => self.push_other_line(text),
                }
            }
            Some(SectionBody::Lines(lines)) => lines.push(text.to_string()),
            None => self.push_other_line(text),
        }
    }
}

/// Parses a plaintext or Markdown resume into ordered sections.
pub fn parse_resume_text(raw: &str, format: DocFormat) -> Result<ResumeDoc, IngestError> {
    if raw.trim().is_empty() {
        return Err(IngestError::EmptyDocument);
    }
    let markdown = match format {
        DocFormat::Markdown => true,
        DocFormat::Plaintext => false,
        other => {
            return Err(IngestError::UnsupportedFormat {
                format: other,
                what: "resume text",
            })
        }
    };
    let mut b = Builder {
        doc: ResumeDoc {
            name: None,
            sections: Vec::new(),
            source: String::new(),
        },
        active: None,
        overflow: None,
    };
    for raw_line in raw.lines() {
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        if markdown && line.starts_with('#') {
            let level = line.chars().take_while(|c| *c == '#').count();
            let text = line[level..].trim();
            if text.is_empty() {
                continue;
            }
            match level {
                1 if b.doc.sections.is_empty() && b.doc.name.is_none() => {
                    b.doc.name = Some(text.to_string())
                }
                1 | 2 => b.open_section(text),
                _ => match b.current().map(|s| &mut s.body) {
                    Some(SectionBody::Entries(entries)) => entries.push(parse_entry_heading(text)),
                    _ => b.push_content(text),
                },
            }
            continue;
        }
        if !markdown && strip_bullet(line).is_none() {
            if SectionKind::from_heading(line) != SectionKind::Other {
                b.open_section(line);
                continue;
            }
            if b.doc.sections.is_empty() && b.doc.name.is_none() {
                b.doc.name = Some(line.to_string());
                continue;
            }
        }
        b.push_content(line);
    }
    Ok(b.doc)
}

/// Canonical Markdown rendering; `parse_resume_text(render_markdown(d), Markdown)` reproduces `d`.
pub fn render_markdown(doc: &ResumeDoc) -> String {
    let mut out = String::new();
    if let Some(name) = &doc.name {
        out.push_str(&format!("# {name}\n\n"));
    }
    for (i, section) in doc.sections.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("## {}\n", section.heading));
        match &section.body {
            SectionBody::Entries(entries) => {
                for entry in entries {
                    out.push_str(&format!("### {}\n", entry.header_line()));
                    for bullet in &entry.bullets {
                        out.push_str(&format!("- {bullet}\n"));
                    }
                }
            }
            SectionBody::Lines(lines) => {
                for line in lines {
                    out.push_str(line);
                    out.push('\n');
                }
            }
        }
    }
    out
}
