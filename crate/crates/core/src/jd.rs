//! Rule-based job-description element extraction, plus an optional
//! model-assisted mode whose output is validated against the source text.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::gateway::{ChatMessage, ChatRequest, ChatTask, ConstraintBlock, Gateway};
use crate::generation::ascii_normalize;
use crate::ingest::fold;

const DEFAULT_LEXICON: &str = include_str!("../data/skills.txt");

const RESPONSIBILITY_HEADERS: [&str; 6] = [
    "responsibilities",
    "what you'll do",
    "what you will do",
    "the role",
    "duties",
    "responsibility",
];
const QUALIFICATION_HEADERS: [&str; 5] = [
    "requirements",
    "qualifications",
    "what you bring",
    "minimum qualifications",
    "preferred qualifications",
];

#[derive(Debug, thiserror::Error)]
pub enum JdError {
    #[error("job description is empty")]
    EmptyJd,
    #[error("reading lexicon {path}: {source}")]
    Lexicon {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementCategory {
    Skill,
    Responsibility,
    Qualification,
}

impl ElementCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ElementCategory::Skill => "skill",
            ElementCategory::Responsibility => "responsibility",
            ElementCategory::Qualification => "qualification",
        }
    }

    pub const ALL: [ElementCategory; 3] = [
        ElementCategory::Skill,
        ElementCategory::Responsibility,
        ElementCategory::Qualification,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JdElement {
    pub element_id: String,
    pub category: ElementCategory,
    pub text: String,
    /// 1-based line of the JD where the element starts.
    pub source_line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JdAnalysis {
    pub jd_id: String,
    pub role_title: Option<String>,
    pub elements: Vec<JdElement>,
    pub raw_hash: String,
}

impl JdAnalysis {
    pub fn of_category(&self, category: ElementCategory) -> impl Iterator<Item = &JdElement> {
        self.elements.iter().filter(move |e| e.category == category)
    }

    pub fn element(&self, id: &str) -> Option<&JdElement> {
        self.elements.iter().find(|e| e.element_id == id)
    }

    pub fn counts(&self) -> [usize; 3] {
        ElementCategory::ALL.map(|c| self.of_category(c).count())
    }
}

/// Skill terms matched case-insensitively on word boundaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkillLexicon {
    terms: Vec<String>,
}

impl SkillLexicon {
    /// One term per line; lines starting with `#` are comments.
    pub fn parse(text: &str) -> Self {
        let mut seen = HashSet::new();
        let terms = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .filter(|l| seen.insert(l.to_lowercase()))
            .map(str::to_string)
            .collect();
        SkillLexicon { terms }
    }

    pub fn load(path: &Path) -> Result<Self, JdError> {
        std::fs::read_to_string(path)
            .map(|t| Self::parse(&t))
            .map_err(|source| JdError::Lexicon {
                path: path.display().to_string(),
                source,
            })
    }

    pub fn from_terms<I: IntoIterator<Item = S>, S: Into<String>>(terms: I) -> Self {
        SkillLexicon {
            terms: terms.into_iter().map(Into::into).collect(),
        }
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }
}

impl Default for SkillLexicon {
    fn default() -> Self {
        Self::parse(DEFAULT_LEXICON)
    }
}

/// Byte offset of the first word-bounded, case-insensitive match of `term`.
fn find_term(haystack_lower: &str, term_lower: &str) -> Option<usize> {
    let mut from = 0;
    while let Some(pos) = haystack_lower[from..].find(term_lower) {
        let start = from + pos;
        let end = start + term_lower.len();
        let before = haystack_lower[..start].chars().next_back();
        let after = haystack_lower[end..].chars().next();
        let boundary = |c: Option<char>| c.is_none_or(|c| !c.is_alphanumeric());
        if boundary(before) && boundary(after) {
            return Some(start);
        }
        from = start
            + haystack_lower[start..]
                .chars()
                .next()
                .map_or(1, char::len_utf8);
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Block {
    None,
    Unknown,
    Known(ElementCategory),
}

fn strip_header(line: &str) -> String {
    let t = line.trim().trim_start_matches('#').trim();
    fold(t.trim_end_matches(':')).replace('\u{2019}', "'")
}

fn classify_header(line: &str) -> Option<Block> {
    let text = strip_header(line);
    let contains_any = |set: &[&str]| set.iter().any(|h| text.contains(h));
    let explicit = line.trim().starts_with('#') || line.trim().ends_with(':');
    if contains_any(&QUALIFICATION_HEADERS) && (explicit || text.split(' ').count() <= 4) {
        return Some(Block::Known(ElementCategory::Qualification));
    }
    if contains_any(&RESPONSIBILITY_HEADERS) && (explicit || text.split(' ').count() <= 4) {
        return Some(Block::Known(ElementCategory::Responsibility));
    }
    explicit.then_some(Block::Unknown)
}

fn strip_bullet(line: &str) -> Option<&str> {
    crate::ingest::strip_bullet_marker(line)
}

fn clean_element(text: &str) -> String {
    text.trim()
        .trim_end_matches([';', '.', ','])
        .trim()
        .to_string()
}

fn hash_hex(raw: &str) -> String {
    hex::encode(Sha256::digest(raw.as_bytes()))
}

/// Extracts skill, responsibility and qualification elements from a JD.
pub fn extract_elements(jd_text: &str, lexicon: &SkillLexicon) -> Result<JdAnalysis, JdError> {
    if jd_text.trim().is_empty() {
        return Err(JdError::EmptyJd);
    }
    let raw_hash = hash_hex(jd_text);
    let mut pending: Vec<(ElementCategory, String, usize)> = Vec::new();
    let mut block = Block::None;
    let mut role_title = None;
    let mut seen_content = false;
    // Index into `pending` of an element that may still absorb wrapped lines.
    let mut open: Option<usize> = None;

    for (idx, raw_line) in jd_text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() {
            open = None;
            continue;
        }
        let bullet = strip_bullet(line);
        if !seen_content {
            seen_content = true;
            if bullet.is_none() && classify_header(line).is_none() {
                role_title = Some(line.trim_start_matches('#').trim().to_string());
                continue;
            }
        }
        if bullet.is_none() {
            if let Some(b) = classify_header(line) {
                block = b;
                open = None;
                continue;
            }
        }
        let category = match block {
            Block::Known(c) => Some(c),
            Block::None | Block::Unknown if bullet.is_some() => {
                Some(ElementCategory::Responsibility)
            }
            _ => None,
        };
        let wrapped = line.chars().next().is_some_and(char::is_lowercase);
        match (bullet, open) {
            (None, Some(i)) if wrapped => {
                let text = clean_element(&format!("{} {}", pending[i].1, line));
                pending[i].1 = text;
            }
            (Some(text), _) => {
                if let Some(cat) = category {
                    let text = clean_element(text);
                    if !text.is_empty() {
                        pending.push((cat, text, line_no));
                        open = Some(pending.len() - 1);
                    }
                }
            }
            (None, _) => {
                if let Block::Known(cat) = block {
                    pending.push((cat, clean_element(line), line_no));
                    open = Some(pending.len() - 1);
                }
            }
        }
    }

    let lower = jd_text.to_lowercase();
    let mut skills: Vec<(usize, String)> = lexicon
        .terms()
        .iter()
        .filter_map(|t| find_term(&lower, &t.to_lowercase()).map(|pos| (pos, t.clone())))
        .collect();
    skills.sort_by_key(|(pos, _)| *pos);

    let mut elements: Vec<JdElement> = pending
        .into_iter()
        .filter(|(_, text, _)| !text.is_empty())
        .map(|(category, text, source_line)| JdElement {
            element_id: String::new(),
            category,
            text,
            source_line,
        })
        .collect();
    for (pos, term) in skills {
        let source_line = lower[..pos].matches('\n').count() + 1;
        elements.push(JdElement {
            element_id: String::new(),
            category: ElementCategory::Skill,
            text: term,
            source_line,
        });
    }
    for (i, e) in elements.iter_mut().enumerate() {
        e.element_id = format!("e{:02}", i + 1);
    }
    Ok(JdAnalysis {
        jd_id: raw_hash[..12].to_string(),
        role_title,
        elements,
        raw_hash,
    })
}

/// Folded, ASCII-normalized form used for faithfulness checks.
pub fn faithful_form(text: &str) -> String {
    fold(&ascii_normalize(text).text)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmExtraction {
    pub analysis: JdAnalysis,
    pub fell_back: bool,
    /// Texts the model returned that do not occur in the JD.
    pub dropped: Vec<String>,
}

#[derive(Deserialize)]
struct ModelElement {
    category: ElementCategory,
    text: String,
}

/// Model-assisted extraction. Elements not found verbatim in the JD are
/// discarded; any gateway or parse failure falls back to [`extract_elements`].
pub fn llm_extract(
    jd_text: &str,
    lexicon: &SkillLexicon,
    gateway: &dyn Gateway,
    seed: u64,
) -> Result<LlmExtraction, JdError> {
    let rules = extract_elements(jd_text, lexicon)?;
    let request = ChatRequest {
        task: ChatTask::JdExtract,
        messages: vec![
            ChatMessage::system(
                "Extract the skills, responsibilities and qualifications from the job description.",
            ),
            ChatMessage::user(jd_text),
        ],
        constraints: Some(ConstraintBlock {
            rules: vec!["Quote element text exactly as it appears in the job description.".into()],
            response_schema: r#"[{"category":"skill|responsibility|qualification","text":"..."}]"#
                .into(),
        }),
        snippet: None,
        seed,
    };
    let fallback = |rules: JdAnalysis| LlmExtraction {
        analysis: rules,
        fell_back: true,
        dropped: Vec::new(),
    };
    let response = match gateway.chat(&request) {
        Ok(r) => r,
        Err(e) => {
            log::warn!("jd extraction via gateway failed, using rules: {e}");
            return Ok(fallback(rules));
        }
    };
    let parsed: Vec<ModelElement> = match serde_json::from_str(response.text.trim()) {
        Ok(p) => p,
        Err(e) => {
            log::warn!("jd extraction response unparseable, using rules: {e}");
            return Ok(fallback(rules));
        }
    };
    let haystack = faithful_form(jd_text);
    let lines: Vec<String> = jd_text.lines().map(faithful_form).collect();
    let mut dropped = Vec::new();
    let mut seen = HashSet::new();
    let mut elements = Vec::new();
    for m in parsed {
        let text = m.text.trim().to_string();
        let form = faithful_form(&text);
        if form.is_empty() || !haystack.contains(&form) {
            dropped.push(text);
            continue;
        }
        if !seen.insert((m.category, form.clone())) {
            continue;
        }
        let source_line = lines
            .iter()
            .position(|l| l.contains(&form))
            .map_or(0, |i| i + 1);
        elements.push(JdElement {
            element_id: format!("e{:02}", elements.len() + 1),
            category: m.category,
            text,
            source_line,
        });
    }
    Ok(LlmExtraction {
        analysis: JdAnalysis { elements, ..rules },
        fell_back: false,
        dropped,
    })
}
