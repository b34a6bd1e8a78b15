use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{render_markdown, CareerRecord, ExperienceEntry, IngestError, ResumeDoc, SectionKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChunkLevel {
    Document,
    Section,
    Entry,
    Bullet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub section_kind: SectionKind,
    pub level: ChunkLevel,
    pub parent_id: Option<String>,
    pub text: String,
    pub employer: Option<String>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

fn entry_text(entry: &ExperienceEntry) -> String {
    let mut text = entry.employer.clone();
    if !entry.title.is_empty() {
        text.push_str(" — ");
        text.push_str(&entry.title);
    }
    if !entry.bullets.is_empty() {
        text.push_str(": ");
        text.push_str(&entry.bullets.join("; "));
    }
    text
}

struct Emitter<'a> {
    doc_id: &'a str,
    out: Vec<Chunk>,
}

impl Emitter<'_> {
    #[allow(clippy::too_many_arguments)]
    fn emit(
        &mut self,
        chunk_id: String,
        section_kind: SectionKind,
        level: ChunkLevel,
        parent_id: Option<&str>,
        text: String,
        employer: Option<&str>,
        metadata: BTreeMap<String, String>,
    ) -> String {
        self.out.push(Chunk {
            chunk_id: chunk_id.clone(),
            doc_id: self.doc_id.to_string(),
            section_kind,
            level,
            parent_id: parent_id.map(str::to_string),
            text,
            employer: employer.map(str::to_string),
            metadata,
        });
        chunk_id
    }

    fn emit_entry(
        &mut self,
        section_id: &str,
        j: usize,
        entry: &ExperienceEntry,
        extra: &BTreeMap<String, String>,
    ) {
        let mut meta = extra.clone();
        meta.insert("title".into(), entry.title.clone());
        meta.insert("date_range".into(), entry.date_range.clone());
        let entry_id = self.emit(
            format!("{section_id}/e{j}"),
            SectionKind::Experience,
            ChunkLevel::Entry,
            Some(section_id),
            entry_text(entry),
            Some(&entry.employer),
            meta.clone(),
        );
        for (k, bullet) in entry.bullets.iter().enumerate() {
            if bullet.trim().is_empty() {
                continue;
            }
            self.emit(
                format!("{entry_id}/b{k}"),
                SectionKind::Experience,
                ChunkLevel::Bullet,
                Some(&entry_id),
                bullet.clone(),
                Some(&entry.employer),
                meta.clone(),
            );
        }
    }
}

/// Splits a resume into document, section, entry and bullet chunks.
///
/// Chunk ids are positional paths (`{doc_id}/s{i}/e{j}/b{k}`), so identical input
/// always yields the same id sequence.
pub fn chunkize(doc: &ResumeDoc, doc_id: &str) -> Vec<Chunk> {
    let mut em = Emitter {
        doc_id,
        out: Vec::new(),
    };
    let mut doc_meta = BTreeMap::new();
    if let Some(name) = &doc.name {
        doc_meta.insert("name".to_string(), name.clone());
    }
    let root = em.emit(
        doc_id.to_string(),
        SectionKind::Other,
        ChunkLevel::Document,
        None,
        render_markdown(doc),
        None,
        doc_meta,
    );
    for (i, section) in doc.sections.iter().enumerate() {
        let mut text = section.heading.clone();
        match section.kind {
            SectionKind::Experience => {
                for entry in section.entries() {
                    text.push('\n');
                    text.push_str(&entry.header_line());
                }
            }
            _ => {
                for line in section.lines() {
                    text.push('\n');
                    text.push_str(line);
                }
            }
        }
        let meta = BTreeMap::from([("section".to_string(), section.heading.clone())]);
        let section_id = em.emit(
            format!("{root}/s{i}"),
            section.kind,
            ChunkLevel::Section,
            Some(&root),
            text,
            None,
            meta.clone(),
        );
        for (j, entry) in section.entries().iter().enumerate() {
            em.emit_entry(&section_id, j, entry, &meta);
        }
    }
    em.out
}

/// Chunks structured career records as a single experience section.
pub fn chunkize_records(records: &[CareerRecord], doc_id: &str) -> Vec<Chunk> {
    let mut em = Emitter {
        doc_id,
        out: Vec::new(),
    };
    let doc_text = records
        .iter()
        .map(|r| entry_text(&r.entry))
        .collect::<Vec<_>>()
        .join("\n");
    let root = em.emit(
        doc_id.to_string(),
        SectionKind::Other,
        ChunkLevel::Document,
        None,
        doc_text,
        None,
        BTreeMap::new(),
    );
    let header_lines = records
        .iter()
        .map(|r| r.entry.header_line())
        .collect::<Vec<_>>()
        .join("\n");
    let section_meta = BTreeMap::from([("section".to_string(), "Career Records".to_string())]);
    let section_id = em.emit(
        format!("{root}/s0"),
        SectionKind::Experience,
        ChunkLevel::Section,
        Some(&root),
        format!("Career Records\n{header_lines}"),
        None,
        section_meta.clone(),
    );
    for (j, record) in records.iter().enumerate() {
        let mut meta = section_meta.clone();
        if !record.category.is_empty() {
            meta.insert("category".into(), record.category.clone());
        }
        if !record.skills.is_empty() {
            meta.insert("skills".into(), record.skills.join(", "));
        }
        em.emit_entry(&section_id, j, &record.entry, &meta);
    }
    em.out
}

fn parent_ok(child: ChunkLevel, parent: ChunkLevel) -> bool {
    match child {
        ChunkLevel::Document => false,
        ChunkLevel::Bullet => parent == ChunkLevel::Entry,
        _ => parent < child,
    }
}

/// Checks the parent graph: unique ids, parents exist at a coarser level,
/// bullets hang off entries, and each document has exactly one root.
pub fn verify_forest(chunks: &[Chunk]) -> Result<(), IngestError> {
    let mut by_id: HashMap<&str, &Chunk> = HashMap::with_capacity(chunks.len());
    for c in chunks {
        if c.text.trim().is_empty() {
            return Err(IngestError::BrokenTree(format!(
                "{} has empty text",
                c.chunk_id
            )));
        }
        if by_id.insert(c.chunk_id.as_str(), c).is_some() {
            return Err(IngestError::BrokenTree(format!(
                "duplicate id {}",
                c.chunk_id
            )));
        }
    }
    let mut roots: BTreeMap<&str, usize> = BTreeMap::new();
    for c in chunks {
        match &c.parent_id {
            None => {
                if c.level != ChunkLevel::Document {
                    return Err(IngestError::BrokenTree(format!(
                        "{} is a root but not a document chunk",
                        c.chunk_id
                    )));
                }
                *roots.entry(c.doc_id.as_str()).or_default() += 1;
            }
            Some(pid) => {
                let parent = by_id.get(pid.as_str()).ok_or_else(|| {
                    IngestError::BrokenTree(format!("{} has missing parent {pid}", c.chunk_id))
                })?;
                if !parent_ok(c.level, parent.level) || parent.doc_id != c.doc_id {
                    return Err(IngestError::BrokenTree(format!(
                        "{} ({:?}) cannot hang off {pid} ({:?})",
                        c.chunk_id, c.level, parent.level
                    )));
                }
            }
        }
    }
    let docs: std::collections::BTreeSet<&str> = chunks.iter().map(|c| c.doc_id.as_str()).collect();
    for d in docs {
        if roots.get(d) != Some(&1) {
            return Err(IngestError::BrokenTree(format!(
                "document {d} needs exactly one root"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_resume_text, DocFormat, Section, SectionBody};

    fn one_entry_doc() -> ResumeDoc {
        ResumeDoc {
            name: None,
            sections: vec![Section {
                kind: SectionKind::Experience,
                heading: "Experience".into(),
                body: SectionBody::Entries(vec![ExperienceEntry {
                    employer: "Acme".into(),
                    title: "Engineer".into(),
                    date_range: "2020-2022".into(),
                    bullets: vec!["Built pipelines".into(), "Ran SQL audits".into()],
                }]),
            }],
            source: "d".into(),
        }
    }

    #[test]
    fn counting_rule() {
        let chunks = chunkize(&one_entry_doc(), "d");
        assert_eq!(chunks.len(), 5);
        let ids: Vec<_> = chunks.iter().map(|c| c.chunk_id.as_str()).collect();
        assert_eq!(ids, ["d", "d/s0", "d/s0/e0", "d/s0/e0/b0", "d/s0/e0/b1"]);
        verify_forest(&chunks).unwrap();
    }

    #[test]
    fn employer_propagates() {
        let chunks = chunkize(&one_entry_doc(), "d");
        for c in &chunks {
            let expect = matches!(c.level, ChunkLevel::Entry | ChunkLevel::Bullet);
            assert_eq!(c.employer.is_some(), expect, "{}", c.chunk_id);
        }
    }

    #[test]
    fn parents_exist_and_are_coarser() {
        let doc = parse_resume_text(
            "## Summary\nx\n## Experience\n### A — B (1)\n- one\n- two\n### C — D (2)\n- three",
            DocFormat::Markdown,
        )
        .unwrap();
        let chunks = chunkize(&doc, "doc");
        verify_forest(&chunks).unwrap();
        for c in chunks.iter().skip(1) {
            let pid = c.parent_id.as_ref().unwrap();
            assert!(c.chunk_id.starts_with(pid.as_str()));
        }
    }

    #[test]
    fn forest_rejects_dangling_parent() {
        let mut chunks = chunkize(&one_entry_doc(), "d");
        chunks[3].parent_id = Some("d/s9".into());
        assert!(verify_forest(&chunks).is_err());
    }

    #[test]
    fn forest_rejects_bullet_under_section() {
        let mut chunks = chunkize(&one_entry_doc(), "d");
        chunks[3].parent_id = Some("d/s0".into());
        assert!(verify_forest(&chunks).is_err());
    }
}
