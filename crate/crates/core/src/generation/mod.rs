//! Draft generation and quality control: rewrite, fallback, assembly,
//! guardrails, polish, review and rendering.

mod ascii;
mod assemble;
mod fallback;
mod guardrails;
mod polish;
mod render;
mod review;
mod rewrite;

use serde::{Deserialize, Serialize};

use crate::ingest::SectionKind;
use crate::vault::VaultProvenance;

pub use ascii::{ascii_map, ascii_normalize, AsciiOutput};
pub use assemble::assemble;
pub use fallback::{fallback_for, template_text, FallbackConfig, FallbackItem};
pub use guardrails::{guardrails_check, org_candidates, Allowlist, SourceIndex};
pub use polish::{polish, DEDUPE_THRESHOLD};
pub use render::{render, RenderFormat, HIGHLIGHTS_HEADING};
pub use review::{holistic_review, ReviewOutcome};
pub use rewrite::{rewrite_snippets, summarize, RetrievedSnippet, RewriteOutcome};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GenerationError {
    #[error("merge exclusion violated at {0}")]
    MergeExclusion(String),
    #[error("invalid provenance: {0}")]
    Provenance(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProvenanceTag {
    VaultResume,
    VaultCareerRecord,
    VaultGenerated,
    FallbackLlm,
    FallbackTemplate,
    TargetResume,
}

impl ProvenanceTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ProvenanceTag::VaultResume => "vault_resume",
            ProvenanceTag::VaultCareerRecord => "vault_career_record",
            ProvenanceTag::VaultGenerated => "vault_generated",
            ProvenanceTag::FallbackLlm => "fallback_llm",
            ProvenanceTag::FallbackTemplate => "fallback_template",
            ProvenanceTag::TargetResume => "target_resume",
        }
    }

    pub fn is_vault(self) -> bool {
        matches!(
            self,
            ProvenanceTag::VaultResume
                | ProvenanceTag::VaultCareerRecord
                | ProvenanceTag::VaultGenerated
        )
    }

    pub fn is_fallback(self) -> bool {
        matches!(
            self,
            ProvenanceTag::FallbackLlm | ProvenanceTag::FallbackTemplate
        )
    }
}

impl From<VaultProvenance> for ProvenanceTag {
    fn from(p: VaultProvenance) -> Self {
        match p {
            VaultProvenance::VaultResume => ProvenanceTag::VaultResume,
            VaultProvenance::VaultCareerRecord => ProvenanceTag::VaultCareerRecord,
            VaultProvenance::VaultGenerated => ProvenanceTag::VaultGenerated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tag: ProvenanceTag,
    pub source_doc: Option<String>,
    pub source_chunk: Option<String>,
}

impl Provenance {
    pub fn vault(tag: VaultProvenance, doc: &str, chunk: &str) -> Self {
        Provenance {
            tag: tag.into(),
            source_doc: Some(doc.to_string()),
            source_chunk: Some(chunk.to_string()),
        }
    }

    pub fn target(doc: &str, chunk: Option<String>) -> Self {
        Provenance {
            tag: ProvenanceTag::TargetResume,
            source_doc: Some(doc.to_string()),
            source_chunk: chunk,
        }
    }

    pub fn fallback(tag: ProvenanceTag) -> Self {
        debug_assert!(tag.is_fallback());
        Provenance {
            tag,
            source_doc: None,
            source_chunk: None,
        }
    }

    pub fn validate(&self) -> Result<(), GenerationError> {
        if self.tag.is_vault() && self.source_chunk.is_none() {
            return Err(GenerationError::Provenance(format!(
                "{} without source chunk",
                self.tag.as_str()
            )));
        }
        if self.tag.is_fallback() && (self.source_doc.is_some() || self.source_chunk.is_some()) {
            return Err(GenerationError::Provenance(format!(
                "{} with source reference",
                self.tag.as_str()
            )));
        }
        Ok(())
    }

    /// Short label used in review bundles.
    pub fn label(&self) -> String {
        match (&self.source_doc, &self.source_chunk) {
            (_, Some(chunk)) => format!("{} {}", self.tag.as_str(), chunk),
            (Some(doc), None) => format!("{} {}", self.tag.as_str(), doc),
            _ => self.tag.as_str().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftBullet {
    pub item_id: String,
    pub text: String,
    pub provenance: Provenance,
    /// Hybrid confidence of the retrieved snippet; `None` for base bullets.
    #[serde(default)]
    pub confidence: Option<f64>,
    #[serde(default)]
    pub matched_elements: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RawEntry {
    employer: String,
    title: String,
    date_range: String,
    bullets: Vec<DraftBullet>,
}

/// An experience entry whose bullets can never carry fallback provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEntry")]
pub struct DraftEntry {
    pub employer: String,
    pub title: String,
    pub date_range: String,
    bullets: Vec<DraftBullet>,
}

impl TryFrom<RawEntry> for DraftEntry {
    type Error = GenerationError;

    fn try_from(raw: RawEntry) -> Result<Self, Self::Error> {
        let mut entry = DraftEntry::new(raw.employer, raw.title, raw.date_range);
        for b in raw.bullets {
            entry.push(b)?;
        }
        Ok(entry)
    }
}

impl DraftEntry {
    pub fn new(employer: String, title: String, date_range: String) -> Self {
        DraftEntry {
            employer,
            title,
            date_range,
            bullets: Vec::new(),
        }
    }

    pub fn bullets(&self) -> &[DraftBullet] {
        &self.bullets
    }

    pub fn push(&mut self, bullet: DraftBullet) -> Result<(), GenerationError> {
        bullet.provenance.validate()?;
        if bullet.provenance.tag.is_fallback() {
            return Err(GenerationError::MergeExclusion(format!(
                "{} / {}",
                self.employer, bullet.item_id
            )));
        }
        self.bullets.push(bullet);
        Ok(())
    }

    pub fn retain(&mut self, keep: impl FnMut(&DraftBullet) -> bool) {
        self.bullets.retain(keep);
    }

    /// Edits bullet texts in place; provenance is not reachable from here.
    pub fn edit_texts(&mut self, mut f: impl FnMut(usize, &mut String)) {
        for (i, b) in self.bullets.iter_mut().enumerate() {
            f(i, &mut b.text);
        }
    }

    pub(crate) fn reorder(&mut self, order: &[usize]) {
        let old = std::mem::take(&mut self.bullets);
        let mut slots: Vec<Option<DraftBullet>> = old.into_iter().map(Some).collect();
        self.bullets = order.iter().filter_map(|&i| slots[i].take()).collect();
    }

    pub fn header_line(&self) -> String {
        let mut line = self.employer.clone();
        if !self.title.is_empty() {
            line.push_str(" — ");
            line.push_str(&self.title);
        }
        if !self.date_range.is_empty() {
            line.push_str(&format!(" ({})", self.date_range));
        }
        line
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "items", rename_all = "snake_case")]
pub enum DraftBody {
    Entries(Vec<DraftEntry>),
    Lines(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftSection {
    pub kind: SectionKind,
    pub heading: String,
    pub body: DraftBody,
}

impl DraftSection {
    pub fn is_empty(&self) -> bool {
        match &self.body {
            DraftBody::Entries(e) => e.is_empty(),
            DraftBody::Lines(l) => l.is_empty(),
        }
    }

    pub fn entries(&self) -> &[DraftEntry] {
        match &self.body {
            DraftBody::Entries(e) => e,
            DraftBody::Lines(_) => &[],
        }
    }
}

/// Content kept for human inspection only; never rendered into the resume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Highlight {
    pub item_id: String,
    /// Fallback tier (1, 2 or 3); `None` for vault content with no matching employer entry.
    pub tier: Option<u8>,
    pub text: String,
    pub provenance: Provenance,
    #[serde(default)]
    pub target_elements: Vec<String>,
    #[serde(default)]
    pub employer: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draft {
    #[serde(default)]
    pub name: Option<String>,
    pub sections: Vec<DraftSection>,
    pub tailored_highlights: Vec<Highlight>,
    pub summary_text: String,
}

impl Draft {
    pub fn entries(&self) -> impl Iterator<Item = &DraftEntry> {
        self.sections.iter().flat_map(|s| s.entries().iter())
    }

    pub fn entries_mut(&mut self) -> impl Iterator<Item = &mut DraftEntry> {
        self.sections.iter_mut().flat_map(|s| match &mut s.body {
            DraftBody::Entries(e) => e.iter_mut(),
            DraftBody::Lines(_) => [].iter_mut(),
        })
    }

    /// Re-checks merge exclusion over every entry bullet.
    pub fn check_merge_exclusion(&self) -> Result<(), GenerationError> {
        for entry in self.entries() {
            for b in entry.bullets() {
                if b.provenance.tag.is_fallback() {
                    return Err(GenerationError::MergeExclusion(format!(
                        "{} / {}",
                        entry.employer, b.item_id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Every text in entry bullets, highlights excluded.
    pub fn entry_texts(&self) -> Vec<&str> {
        self.entries()
            .flat_map(|e| e.bullets().iter().map(|b| b.text.as_str()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    FabricatedEmployer,
    UnsupportedMetric,
    Formatting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingAction {
    Removed,
    Flagged,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardrailFinding {
    pub kind: FindingKind,
    /// Path such as `experience/Acme/v03`, `summary` or `highlights/f02`.
    pub location: String,
    pub action: FindingAction,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewStatus {
    Ok,
    NeedsRewrite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    Coherence,
    Duplication,
    Alignment,
    Phrasing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewIssue {
    pub kind: IssueKind,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewVerdict {
    pub status: ReviewStatus,
    #[serde(default)]
    pub issues: Vec<ReviewIssue>,
}

impl ReviewVerdict {
    pub fn ok() -> Self {
        ReviewVerdict {
            status: ReviewStatus::Ok,
            issues: Vec::new(),
        }
    }
}
