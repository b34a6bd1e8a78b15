//! Fail-closed screening of a draft: fabricated organizations, unsupported
//! metrics and formatting defects.

use std::collections::{BTreeMap, HashSet};
use std::sync::LazyLock;

use regex::Regex;

use super::{
    ascii_normalize, Draft, DraftBody, FindingAction, FindingKind, GenerationError,
    GuardrailFinding, Highlight,
};
use crate::ingest::fold;
use crate::jd::SkillLexicon;
use crate::matcher::partial_ratio;

const ALLOW_THRESHOLD: f64 = 90.0;
const TRIGGERS: [&str; 8] = [
    "at", "for", "with", "from", "by", "joined", "joining", "within",
];
const CONNECTORS: [&str; 3] = ["&", "of", "and"];
const ORG_SUFFIXES: [&str; 17] = [
    "inc",
    "corp",
    "corporation",
    "llc",
    "ltd",
    "labs",
    "group",
    "company",
    "co",
    "partners",
    "technologies",
    "systems",
    "solutions",
    "consulting",
    "holdings",
    "bank",
    "industries",
];

static METRIC: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[$€£]?\d+(?:[.,]\d+)*(?:%|\+|[kKmMbB]\b)?").unwrap());
static CLAUSE_SPLIT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[,;]\s+").unwrap());

/// Employer names the draft may mention: target resume plus vault sources.
#[derive(Debug, Clone, Default)]
pub struct Allowlist {
    employers: Vec<String>,
}

impl Allowlist {
    pub fn new<I: IntoIterator<Item = S>, S: Into<String>>(employers: I) -> Self {
        let mut seen = HashSet::new();
        let employers = employers
            .into_iter()
            .map(Into::into)
            .filter(|e: &String| !e.trim().is_empty() && seen.insert(fold(e)))
            .collect();
        Allowlist { employers }
    }

    pub fn employers(&self) -> &[String] {
        &self.employers
    }

    pub fn allows(&self, name: &str) -> bool {
        let folded = fold(name);
        if folded.chars().count() < 4 {
            return self.employers.iter().any(|e| fold(e) == folded);
        }
        self.employers
            .iter()
            .any(|e| partial_ratio(&folded, e) >= ALLOW_THRESHOLD)
    }
}

/// Source texts a claim may be checked against, by chunk and by employer.
#[derive(Debug, Clone, Default)]
pub struct SourceIndex {
    by_chunk: BTreeMap<String, String>,
    by_employer: BTreeMap<String, Vec<String>>,
}

impl SourceIndex {
    pub fn add(&mut self, chunk_id: &str, employer: Option<&str>, text: &str) {
        self.by_chunk.insert(chunk_id.to_string(), text.to_string());
        if let Some(e) = employer {
            self.by_employer
                .entry(fold(e))
                .or_default()
                .push(text.to_string());
        }
    }

    pub fn chunk_text(&self, chunk_id: &str) -> Option<&str> {
        self.by_chunk.get(chunk_id).map(String::as_str)
    }

    pub fn employer_texts(&self, employer: &str) -> &[String] {
        self.by_employer
            .get(&fold(employer))
            .map_or(&[], Vec::as_slice)
    }
}

fn is_capitalized(word: &str) -> bool {
    word.chars().next().is_some_and(char::is_uppercase)
}

/// Organization-like phrases: capitalized runs after a trigger preposition, or
/// capitalized runs ending in a corporate suffix.
pub fn org_candidates(text: &str) -> Vec<String> {
    // (word without edge punctuation, phrase ends after this word)
    let words: Vec<(String, bool)> = text
        .split_whitespace()
        .map(|w| {
            let ends = w.ends_with(['.', ',', ';', ':', '!', '?', ')']);
            let clean = w.trim_matches(|c: char| !c.is_alphanumeric() && c != '&');
            (clean.to_string(), ends)
        })
        .filter(|(w, _)| !w.is_empty())
        .collect();

    let run_from = |start: usize| -> usize {
        // Returns the exclusive end of a capitalized run beginning at `start`.
        let mut end = start;
        let mut i = start;
        while i < words.len() {
            let (w, ends) = &words[i];
            if is_capitalized(w) {
                end = i + 1;
                if *ends {
                    break;
                }
                i += 1;
            } else if CONNECTORS.contains(&w.to_lowercase().as_str()) && !*ends && end == i {
                i += 1;
            } else {
                break;
            }
        }
        end
    };

    let mut out: Vec<String> = Vec::new();
    let mut push = |words: &[(String, bool)]| {
        let phrase = words
            .iter()
            .map(|(w, _)| w.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        if !phrase.is_empty() && !out.contains(&phrase) {
            out.push(phrase);
        }
    };
    let mut i = 0;
    while i < words.len() {
        let (w, ends) = &words[i];
        if !*ends
            && TRIGGERS.contains(&w.to_lowercase().as_str())
            && i + 1 < words.len()
            && is_capitalized(&words[i + 1].0)
        {
            let end = run_from(i + 1);
            push(&words[i + 1..end]);
            i = end;
            continue;
        }
        if is_capitalized(w) {
            let end = run_from(i);
            let last = words[end - 1].0.to_lowercase();
            if end - i >= 2 && ORG_SUFFIXES.contains(&last.as_str()) {
                push(&words[i..end]);
            }
            i = end.max(i + 1);
            continue;
        }
        i += 1;
    }
    out
}

struct Screen<'a> {
    allow: &'a Allowlist,
    lexicon: HashSet<String>,
}

impl Screen<'_> {
    fn fabricated(&self, text: &str, source: &str) -> Option<String> {
        let source = fold(source);
        org_candidates(text).into_iter().find(|cand| {
            let f = fold(cand);
            if self.allow.allows(cand) || self.lexicon.contains(&f) || source.contains(&f) {
                return false;
            }
            let all_known = f
                .split(' ')
                .filter(|w| !CONNECTORS.contains(w))
                .all(|w| self.lexicon.contains(w));
            !all_known
        })
    }
}

fn metric_core(token: &str) -> String {
    token
        .trim_start_matches(['$', '€', '£'])
        .trim_end_matches(['%', '+', 'k', 'K', 'm', 'M', 'b', 'B'])
        .replace(',', "")
}

fn metric_cores(text: &str) -> HashSet<String> {
    METRIC
        .find_iter(text)
        .map(|m| metric_core(m.as_str()))
        .collect()
}

/// Removes clauses whose numbers no source supports. Returns the new text and
/// the unsupported tokens, or `None` when every clause had to go.
fn strip_unsupported(text: &str, sources: &[&str]) -> (Option<String>, Vec<String>) {
    let supported: HashSet<String> = sources.iter().flat_map(|s| metric_cores(s)).collect();
    let mut bad = Vec::new();
    for m in METRIC.find_iter(text) {
        if !supported.contains(&metric_core(m.as_str())) {
            bad.push(m.as_str().to_string());
        }
    }
    if bad.is_empty() {
        return (Some(text.to_string()), bad);
    }
    let kept: Vec<&str> = CLAUSE_SPLIT
        .split(text)
        .filter(|clause| {
            METRIC
                .find_iter(clause)
                .all(|m| supported.contains(&metric_core(m.as_str())))
        })
        .collect();
    if kept.is_empty() {
        return (None, bad);
    }
    let mut joined = kept.join(", ");
    if text.trim_end().ends_with('.') && !joined.ends_with('.') {
        joined.push('.');
    }
    (Some(joined), bad)
}

fn sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        cur.push(c);
        if matches!(c, '.' | '!' | '?') && chars.peek().is_none_or(|n| n.is_whitespace()) {
            out.push(cur.trim().to_string());
            cur.clear();
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

fn finding(
    kind: FindingKind,
    location: String,
    action: FindingAction,
    detail: String,
) -> GuardrailFinding {
    GuardrailFinding {
        kind,
        location,
        action,
        detail,
    }
}

/// Screens the draft. Offending bullets, sentences and highlights are removed;
/// a fallback bullet inside an entry is an error, never a finding.
pub fn guardrails_check(
    draft: &Draft,
    allow: &Allowlist,
    lexicon: &SkillLexicon,
    sources: &SourceIndex,
    element_texts: &BTreeMap<String, String>,
    base_summary: &str,
) -> Result<(Draft, Vec<GuardrailFinding>), GenerationError> {
    draft.check_merge_exclusion()?;
    let screen = Screen {
        allow,
        lexicon: lexicon.terms().iter().map(|t| fold(t)).collect(),
    };
    let mut out = draft.clone();
    let mut findings = Vec::new();

    for section in out.sections.iter_mut() {
        let DraftBody::Entries(entries) = &mut section.body else {
            continue;
        };
        let heading = section.heading.clone();
        entries.retain(|e| {
            let ok = allow.allows(&e.employer);
            if !ok {
                findings.push(finding(
                    FindingKind::FabricatedEmployer,
                    format!("{heading}/{}", e.employer),
                    FindingAction::Removed,
                    format!("employer {:?} is not in any source document", e.employer),
                ));
            }
            ok
        });
        for entry in entries.iter_mut() {
            let employer = entry.employer.clone();
            let employer_sources: Vec<&str> = sources
                .employer_texts(&employer)
                .iter()
                .map(String::as_str)
                .collect();
            let mut drop = HashSet::new();
            let mut rewrites: Vec<(usize, String)> = Vec::new();
            for (i, b) in entry.bullets().iter().enumerate() {
                let location = format!("{heading}/{employer}/{}", b.item_id);
                let own_source = match &b.provenance.source_chunk {
                    Some(c) if b.provenance.tag.is_vault() => {
                        sources.chunk_text(c).unwrap_or("").to_string()
                    }
                    _ => b.text.clone(),
                };
                if let Some(org) = screen.fabricated(&b.text, &own_source) {
                    findings.push(finding(
                        FindingKind::FabricatedEmployer,
                        location,
                        FindingAction::Removed,
                        format!("names unknown organization {org:?}"),
                    ));
                    drop.insert(i);
                    continue;
                }
                let mut metric_sources = employer_sources.clone();
                metric_sources.push(&own_source);
                match strip_unsupported(&b.text, &metric_sources) {
                    (Some(t), bad) if !bad.is_empty() => {
                        findings.push(finding(
                            FindingKind::UnsupportedMetric,
                            location,
                            FindingAction::Flagged,
                            format!("removed clause with {}", bad.join(", ")),
                        ));
                        rewrites.push((i, t));
                    }
                    (None, bad) => {
                        findings.push(finding(
                            FindingKind::UnsupportedMetric,
                            location,
                            FindingAction::Removed,
                            format!("no supported clause left after {}", bad.join(", ")),
                        ));
                        drop.insert(i);
                    }
                    _ => {}
                }
            }
            entry.edit_texts(|i, text| {
                if let Some((_, t)) = rewrites.iter().find(|(j, _)| *j == i) {
                    *text = t.clone();
                }
            });
            let mut idx = 0;
            entry.retain(|_| {
                let keep = !drop.contains(&idx);
                idx += 1;
                keep
            });
        }
    }

    // Summary: drop offending sentences.
    if !out.summary_text.is_empty() {
        let mut kept = Vec::new();
        for s in sentences(&out.summary_text) {
            if let Some(org) = screen.fabricated(&s, base_summary) {
                findings.push(finding(
                    FindingKind::FabricatedEmployer,
                    "summary".into(),
                    FindingAction::Removed,
                    format!("sentence names unknown organization {org:?}"),
                ));
                continue;
            }
            match strip_unsupported(&s, &[base_summary]) {
                (Some(t), bad) => {
                    if !bad.is_empty() {
                        findings.push(finding(
                            FindingKind::UnsupportedMetric,
                            "summary".into(),
                            FindingAction::Flagged,
                            format!("removed clause with {}", bad.join(", ")),
                        ));
                    }
                    kept.push(t);
                }
                (None, bad) => findings.push(finding(
                    FindingKind::UnsupportedMetric,
                    "summary".into(),
                    FindingAction::Removed,
                    format!("sentence with {}", bad.join(", ")),
                )),
            }
        }
        out.summary_text = kept.join(" ");
        for section in out.sections.iter_mut() {
            if section.kind == crate::ingest::SectionKind::Summary {
                section.body = DraftBody::Lines(if out.summary_text.is_empty() {
                    Vec::new()
                } else {
                    vec![out.summary_text.clone()]
                });
            }
        }
    }

    // Highlights: remove on fabrication, strip unsupported clauses.
    let highlights = std::mem::take(&mut out.tailored_highlights);
    for mut h in highlights {
        let location = format!("highlights/{}", h.item_id);
        let source = highlight_source(&h, sources, element_texts);
        if let Some(org) = screen.fabricated(&h.text, &source) {
            findings.push(finding(
                FindingKind::FabricatedEmployer,
                location,
                FindingAction::Removed,
                format!("names unknown organization {org:?}"),
            ));
            continue;
        }
        match strip_unsupported(&h.text, &[&source]) {
            (Some(t), bad) => {
                if !bad.is_empty() {
                    findings.push(finding(
                        FindingKind::UnsupportedMetric,
                        location,
                        FindingAction::Flagged,
                        format!("removed clause with {}", bad.join(", ")),
                    ));
                }
                h.text = t;
                out.tailored_highlights.push(h);
            }
            (None, bad) => findings.push(finding(
                FindingKind::UnsupportedMetric,
                location,
                FindingAction::Removed,
                format!("no supported clause left after {}", bad.join(", ")),
            )),
        }
    }

    // Formatting: characters the ASCII table cannot map, then empty sections.
    let mut flag_text = |location: String, text: &str| {
        let unmapped = ascii_normalize(text).unmapped;
        if !unmapped.is_empty() {
            findings.push(finding(
                FindingKind::Formatting,
                location,
                FindingAction::Flagged,
                format!(
                    "unmappable characters {:?}",
                    unmapped.iter().collect::<String>()
                ),
            ));
        }
    };
    for section in &out.sections {
        flag_text(section.heading.clone(), &section.heading);
        match &section.body {
            DraftBody::Lines(lines) => {
                for (i, l) in lines.iter().enumerate() {
                    flag_text(format!("{}/{i}", section.heading), l);
                }
            }
            DraftBody::Entries(entries) => {
                for e in entries {
                    flag_text(
                        format!("{}/{}", section.heading, e.employer),
                        &e.header_line(),
                    );
                    for b in e.bullets() {
                        flag_text(
                            format!("{}/{}/{}", section.heading, e.employer, b.item_id),
                            &b.text,
                        );
                    }
                }
            }
        }
    }
    for h in &out.tailored_highlights {
        flag_text(format!("highlights/{}", h.item_id), &h.text);
    }
    out.sections.retain(|s| {
        if s.is_empty() {
            findings.push(finding(
                FindingKind::Formatting,
                s.heading.clone(),
                FindingAction::Removed,
                "empty section".into(),
            ));
            return false;
        }
        true
    });
    out.check_merge_exclusion()?;
    Ok((out, findings))
}

fn highlight_source(
    h: &Highlight,
    sources: &SourceIndex,
    element_texts: &BTreeMap<String, String>,
) -> String {
    if h.provenance.tag.is_vault() {
        if let Some(text) = h
            .provenance
            .source_chunk
            .as_deref()
            .and_then(|c| sources.chunk_text(c))
        {
            return text.to_string();
        }
    }
    h.target_elements
        .iter()
        .filter_map(|id| element_texts.get(id))
        .cloned()
        .collect::<Vec<_>>()
        .join("\n")
}
