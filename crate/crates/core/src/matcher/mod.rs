//! Hybrid semantic/lexical confidence scoring for retrieved snippets.

mod fuzzy;

use serde::{Deserialize, Serialize};

use crate::ingest::fold;
use crate::jd::JdElement;

pub use fuzzy::{indel_distance, partial_ratio, ratio};

pub const DEFAULT_ALPHA: f64 = 0.6;
pub const DEFAULT_TAU: f64 = 0.75;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MatchError {
    #[error("{name} = {value} is outside [0, 1]")]
    Domain { name: &'static str, value: f64 },
}

fn check_unit(name: &'static str, value: f64) -> Result<f64, MatchError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(MatchError::Domain { name, value })
    }
}

/// Maps a cosine similarity onto [0, 1] via (c + 1) / 2.
pub fn semantic_score(cosine: f64) -> f64 {
    (cosine.clamp(-1.0, 1.0) + 1.0) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LexicalScore {
    pub value: f64,
    /// Set when the JD produced no elements; `value` is then 0.
    pub no_elements: bool,
}

/// Mean partial ratio (scaled to [0, 1]) of the snippet against every element.
pub fn lexical_score(snippet_text: &str, elements: &[JdElement]) -> LexicalScore {
    if elements.is_empty() {
        log::warn!("lexical score requested with no JD elements");
        return LexicalScore {
            value: 0.0,
            no_elements: true,
        };
    }
    let snippet: Vec<char> = fold(snippet_text).chars().collect();
    let total: f64 = elements
        .iter()
        .map(|e| {
            let el: Vec<char> = fold(&e.text).chars().collect();
            fuzzy::partial_ratio_chars(&el, &snippet) / 100.0
        })
        .sum();
    LexicalScore {
        value: total / elements.len() as f64,
        no_elements: false,
    }
}

/// `alpha * semantic + (1 - alpha) * lexical`, all arguments in [0, 1].
pub fn hybrid_confidence(semantic: f64, lexical: f64, alpha: f64) -> Result<f64, MatchError> {
    let semantic = check_unit("semantic", semantic)?;
    let lexical = check_unit("lexical", lexical)?;
    let alpha = check_unit("alpha", alpha)?;
    Ok(alpha * semantic + (1.0 - alpha) * lexical)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchScore {
    pub semantic: f64,
    pub lexical: f64,
    pub alpha: f64,
    pub confidence: f64,
}

impl MatchScore {
    pub fn new(semantic: f64, lexical: f64, alpha: f64) -> Result<Self, MatchError> {
        let confidence = hybrid_confidence(semantic, lexical, alpha)?;
        Ok(MatchScore {
            semantic,
            lexical,
            alpha,
            confidence,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSnippet {
    pub chunk_id: String,
    pub matched_elements: Vec<String>,
    pub score: MatchScore,
    pub passes: bool,
}

impl ScoredSnippet {
    pub fn new(
        chunk_id: String,
        matched_elements: Vec<String>,
        score: MatchScore,
        tau: f64,
    ) -> Self {
        ScoredSnippet {
            chunk_id,
            matched_elements,
            passes: score.confidence >= tau,
            score,
        }
    }
}

/// Splits snippets on `confidence >= tau`, preserving order in both halves.
pub fn filter_by_threshold(
    snippets: Vec<ScoredSnippet>,
    tau: f64,
) -> (Vec<ScoredSnippet>, Vec<ScoredSnippet>) {
    let (mut kept, mut dropped): (Vec<_>, Vec<_>) = snippets
        .into_iter()
        .partition(|s| s.score.confidence >= tau);
    for s in kept.iter_mut() {
        s.passes = true;
    }
    for s in dropped.iter_mut() {
        s.passes = false;
    }
    (kept, dropped)
}
