//! Source documents, resume/career-record parsing and hierarchical chunking.

mod chunk;
mod records;
mod resume;

use serde::{Deserialize, Serialize};

pub use chunk::{chunkize, chunkize_records, verify_forest, Chunk, ChunkLevel};
pub use records::{parse_career_records, CareerRecord, CAREER_CSV_HEADER};
pub(crate) use resume::strip_bullet as strip_bullet_marker;
pub use resume::{parse_resume_text, render_markdown};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum IngestError {
    #[error("document is empty")]
    EmptyDocument,
    #[error("schema mismatch: missing or unexpected `{0}`")]
    SchemaMismatch(String),
    #[error("row {row}: {message}")]
    RowError { row: usize, message: String },
    #[error("format {format:?} is not valid for {what}")]
    UnsupportedFormat {
        format: DocFormat,
        what: &'static str,
    },
    #[error("broken chunk tree: {0}")]
    BrokenTree(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocKind {
    ResumeHistory,
    CareerRecord,
    Generated,
    TargetResume,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocFormat {
    Plaintext,
    Markdown,
    Csv,
    Xml,
}

/// A raw input document as submitted for indexing or tailoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceDocument {
    pub doc_id: String,
    pub kind: DocKind,
    #[serde(default)]
    pub title: String,
    pub format: DocFormat,
    pub raw: String,
    #[serde(default)]
    pub dated: Option<chrono::NaiveDate>,
}

impl SourceDocument {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.raw.trim().is_empty() {
            return Err(IngestError::EmptyDocument);
        }
        if self.doc_id.trim().is_empty() || self.doc_id.contains('/') {
            return Err(IngestError::SchemaMismatch("doc_id".into()));
        }
        let record_format = matches!(self.format, DocFormat::Csv | DocFormat::Xml);
        if self.kind == DocKind::CareerRecord && !record_format {
            return Err(IngestError::UnsupportedFormat {
                format: self.format,
                what: "career records",
            });
        }
        if self.kind != DocKind::CareerRecord && record_format {
            return Err(IngestError::UnsupportedFormat {
                format: self.format,
                what: "resume documents",
            });
        }
        Ok(())
    }

    /// Builds a document from a file, inferring kind and format from the
    /// extension: `.csv`/`.xml` are career records, `.md` markdown resumes,
    /// anything else plaintext resumes. `generated` marks resumes as generated.
    pub fn from_path(path: &std::path::Path, generated: bool) -> std::io::Result<SourceDocument> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .to_ascii_lowercase();
        let (kind, format) = match ext.as_str() {
            "csv" => (DocKind::CareerRecord, DocFormat::Csv),
            "xml" => (DocKind::CareerRecord, DocFormat::Xml),
            "md" | "markdown" => (DocKind::ResumeHistory, DocFormat::Markdown),
            _ => (DocKind::ResumeHistory, DocFormat::Plaintext),
        };
        let kind = if generated && kind == DocKind::ResumeHistory {
            DocKind::Generated
        } else {
            kind
        };
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("doc");
        Ok(SourceDocument {
            doc_id: stem.replace('/', "_"),
            kind,
            title: stem.to_string(),
            format,
            raw: std::fs::read_to_string(path)?,
            dated: None,
        })
    }

    /// Parses and chunks the document according to its kind and format.
    pub fn to_chunks(&self) -> Result<Vec<Chunk>, IngestError> {
        self.validate()?;
        match self.kind {
            DocKind::CareerRecord => {
                let records = parse_career_records(&self.raw, self.format)?;
                Ok(chunkize_records(&records, &self.doc_id))
            }
            _ => {
                let doc = parse_resume_text(&self.raw, self.format)?;
                Ok(chunkize(&doc, &self.doc_id))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionKind {
    Summary,
    Skills,
    Experience,
    Education,
    Projects,
    Other,
}

impl SectionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SectionKind::Summary => "summary",
            SectionKind::Skills => "skills",
            SectionKind::Experience => "experience",
            SectionKind::Education => "education",
            SectionKind::Projects => "projects",
            SectionKind::Other => "other",
        }
    }

    /// Maps a heading onto the fixed lexicon. Unknown headings are `Other`.
    pub fn from_heading(heading: &str) -> SectionKind {
        let folded = heading.trim().trim_end_matches(':').trim().to_lowercase();
        match folded.as_str() {
            "summary" | "profile" => SectionKind::Summary,
            "skills" => SectionKind::Skills,
            "experience" | "work experience" | "employment" => SectionKind::Experience,
            "education" => SectionKind::Education,
            "projects" => SectionKind::Projects,
            _ => SectionKind::Other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperienceEntry {
    pub employer: String,
    pub title: String,
    pub date_range: String,
    pub bullets: Vec<String>,
}

impl ExperienceEntry {
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

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "items", rename_all = "snake_case")]
pub enum SectionBody {
    Entries(Vec<ExperienceEntry>),
    Lines(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub kind: SectionKind,
    pub heading: String,
    pub body: SectionBody,
}

impl Section {
    pub fn entries(&self) -> &[ExperienceEntry] {
        match &self.body {
            SectionBody::Entries(e) => e,
            SectionBody::Lines(_) => &[],
        }
    }

    pub fn lines(&self) -> &[String] {
        match &self.body {
            SectionBody::Lines(l) => l,
            SectionBody::Entries(_) => &[],
        }
    }

    pub fn is_empty(&self) -> bool {
        match &self.body {
            SectionBody::Entries(e) => e.is_empty(),
            SectionBody::Lines(l) => l.is_empty(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResumeDoc {
    /// Leading `# Name` line of a Markdown resume, when present.
    #[serde(default)]
    pub name: Option<String>,
    pub sections: Vec<Section>,
    #[serde(default)]
    pub source: String,
}

impl ResumeDoc {
    pub fn entries(&self) -> impl Iterator<Item = &ExperienceEntry> {
        self.sections.iter().flat_map(|s| s.entries().iter())
    }

    pub fn bullet_count(&self) -> usize {
        self.entries().map(|e| e.bullets.len()).sum()
    }

    pub fn employers(&self) -> Vec<String> {
        self.entries().map(|e| e.employer.clone()).collect()
    }
}

/// Lowercases and collapses whitespace. Shared by every text comparison in the crate.
pub fn fold(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}
