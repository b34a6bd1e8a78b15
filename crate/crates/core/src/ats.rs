//! ATS-style fit scoring: category coverage, five weighting profiles,
//! overall/best aggregation, verdicts and baseline-vs-vault deltas.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::gateway::{Gateway, GatewayError};
use crate::jd::{ElementCategory, JdAnalysis};
use crate::matcher::{hybrid_confidence, partial_ratio, semantic_score};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Profile {
    pub name: &'static str,
    pub w_skill: f64,
    pub w_resp: f64,
    pub w_qual: f64,
}

impl Profile {
    pub fn weight(&self, c: ElementCategory) -> f64 {
        match c {
            ElementCategory::Skill => self.w_skill,
            ElementCategory::Responsibility => self.w_resp,
            ElementCategory::Qualification => self.w_qual,
        }
    }
}

pub const PROFILES: [Profile; 5] = [
    Profile {
        name: "Skills-Heavy",
        w_skill: 0.50,
        w_resp: 0.30,
        w_qual: 0.20,
    },
    Profile {
        name: "Role-Aligned",
        w_skill: 0.40,
        w_resp: 0.40,
        w_qual: 0.20,
    },
    Profile {
        name: "Resp.-First",
        w_skill: 0.30,
        w_resp: 0.50,
        w_qual: 0.20,
    },
    Profile {
        name: "Qual.-Heavy",
        w_skill: 0.25,
        w_resp: 0.25,
        w_qual: 0.50,
    },
    Profile {
        name: "Balanced",
        w_skill: 0.33,
        w_resp: 0.34,
        w_qual: 0.33,
    },
];

pub const STRONG_AT: f64 = 75.0;
pub const COMPETITIVE_AT: f64 = 56.0;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AtsError {
    #[error("cannot compare runs of different JDs ({base} vs {vault})")]
    ConditionMismatch { base: String, vault: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementMatch {
    pub element_id: String,
    pub category: ElementCategory,
    pub best_chunk_id: Option<String>,
    pub confidence: f64,
}

/// Per-category coverage in [0, 100]; `None` when the JD has no element of that category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub cov_skill: Option<f64>,
    pub cov_resp: Option<f64>,
    pub cov_qual: Option<f64>,
    pub details: Vec<ElementMatch>,
}

impl CoverageReport {
    pub fn of(&self, c: ElementCategory) -> Option<f64> {
        match c {
            ElementCategory::Skill => self.cov_skill,
            ElementCategory::Responsibility => self.cov_resp,
            ElementCategory::Qualification => self.cov_qual,
        }
    }

    pub fn from_triple(skill: Option<f64>, resp: Option<f64>, qual: Option<f64>) -> Self {
        CoverageReport {
            cov_skill: skill,
            cov_resp: resp,
            cov_qual: qual,
            details: Vec::new(),
        }
    }
}

/// A piece of content eligible for scoring, with its embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoringChunk {
    pub chunk_id: String,
    pub text: String,
    pub embedding: Vec<f32>,
}

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum();
    let na = a.iter().map(|x| *x as f64 * *x as f64).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| *x as f64 * *x as f64).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

/// Coverage from precomputed embeddings. `element_embeddings` is parallel to `jd.elements`.
pub fn coverage_with_embeddings(
    eligible: &[ScoringChunk],
    jd: &JdAnalysis,
    element_embeddings: &[Vec<f32>],
    alpha: f64,
) -> CoverageReport {
    let mut details = Vec::with_capacity(jd.elements.len());
    for (el, emb) in jd.elements.iter().zip(element_embeddings) {
        let mut best: Option<(&str, f64)> = None;
        for c in eligible {
            let sem = semantic_score(cosine(emb, &c.embedding));
            let lex = partial_ratio(&el.text, &c.text) / 100.0;
            let conf = hybrid_confidence(sem, lex, alpha).unwrap_or(0.0);
            if best.is_none_or(|(_, b)| conf > b) {
                best = Some((c.chunk_id.as_str(), conf));
            }
        }
        details.push(ElementMatch {
            element_id: el.element_id.clone(),
            category: el.category,
            best_chunk_id: best.map(|(id, _)| id.to_string()),
            confidence: best.map_or(0.0, |(_, c)| c),
        });
    }
    let cat = |c: ElementCategory| {
        let vals: Vec<f64> = details
            .iter()
            .filter(|d| d.category == c)
            .map(|d| d.confidence)
            .collect();
        (!vals.is_empty()).then(|| 100.0 * vals.iter().sum::<f64>() / vals.len() as f64)
    };
    CoverageReport {
        cov_skill: cat(ElementCategory::Skill),
        cov_resp: cat(ElementCategory::Responsibility),
        cov_qual: cat(ElementCategory::Qualification),
        details,
    }
}

/// Embeds elements and chunk texts through the gateway, then scores coverage.
pub fn coverage(
    eligible: &[(String, String)],
    jd: &JdAnalysis,
    gateway: &dyn Gateway,
    alpha: f64,
) -> Result<CoverageReport, GatewayError> {
    let element_texts: Vec<String> = jd.elements.iter().map(|e| e.text.clone()).collect();
    let element_embeddings = if element_texts.is_empty() {
        Vec::new()
    } else {
        gateway.embed(&element_texts)?
    };
    let texts: Vec<String> = eligible.iter().map(|(_, t)| t.clone()).collect();
    let chunk_embeddings = if texts.is_empty() {
        Vec::new()
    } else {
        gateway.embed(&texts)?
    };
    let chunks: Vec<ScoringChunk> = eligible
        .iter()
        .zip(chunk_embeddings)
        .map(|((id, text), embedding)| ScoringChunk {
            chunk_id: id.clone(),
            text: text.clone(),
            embedding,
        })
        .collect();
    Ok(coverage_with_embeddings(
        &chunks,
        jd,
        &element_embeddings,
        alpha,
    ))
}

/// Weighted score; weights of absent categories are redistributed proportionally.
pub fn profile_score(cov: &CoverageReport, profile: &Profile) -> f64 {
    let mut total_w = 0.0;
    let mut acc = 0.0;
    for c in ElementCategory::ALL {
        if let Some(v) = cov.of(c) {
            total_w += profile.weight(c);
            acc += profile.weight(c) * v;
        }
    }
    if total_w == 0.0 {
        0.0
    } else {
        acc / total_w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Strong,
    Competitive,
    Partial,
}

impl Verdict {
    pub fn from_overall(overall: f64) -> Verdict {
        if overall >= STRONG_AT {
            Verdict::Strong
        } else if overall >= COMPETITIVE_AT {
            Verdict::Competitive
        } else {
            Verdict::Partial
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Strong => "Strong",
            Verdict::Competitive => "Competitive",
            Verdict::Partial => "Partial",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileScore {
    pub name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtsReport {
    pub profile_scores: Vec<ProfileScore>,
    pub overall_fit: f64,
    pub best_profile: f64,
    pub best_profile_name: String,
    pub verdict: Verdict,
    pub coverage: CoverageReport,
}

pub fn ats_report(cov: &CoverageReport) -> AtsReport {
    let profile_scores: Vec<ProfileScore> = PROFILES
        .iter()
        .map(|p| ProfileScore {
            name: p.name.to_string(),
            score: profile_score(cov, p),
        })
        .collect();
    let overall_fit =
        profile_scores.iter().map(|p| p.score).sum::<f64>() / profile_scores.len() as f64;
    let best =
        profile_scores.iter().fold(
            &profile_scores[0],
            |b, p| if p.score > b.score { p } else { b },
        );
    AtsReport {
        best_profile: best.score,
        best_profile_name: best.name.clone(),
        overall_fit,
        verdict: Verdict::from_overall(overall_fit),
        coverage: cov.clone(),
        profile_scores,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Aligned,
    Distant,
    Partial,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::Aligned, Group::Distant, Group::Partial];

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Aligned => "aligned",
            Group::Distant => "distant",
            Group::Partial => "partial",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub jd_id: String,
    pub jd_name: String,
    pub group: Group,
    pub base: f64,
    pub vault: f64,
    pub delta: f64,
    pub base_verdict: Verdict,
    pub vault_verdict: Verdict,
}

pub fn compare_runs(
    jd_name: &str,
    base_jd: &str,
    base: &AtsReport,
    vault_jd: &str,
    vault: &AtsReport,
    group: Group,
) -> Result<DeltaReport, AtsError> {
    if base_jd != vault_jd {
        return Err(AtsError::ConditionMismatch {
            base: base_jd.to_string(),
            vault: vault_jd.to_string(),
        });
    }
    Ok(DeltaReport {
        jd_id: base_jd.to_string(),
        jd_name: jd_name.to_string(),
        group,
        base: base.overall_fit,
        vault: vault.overall_fit,
        delta: vault.overall_fit - base.overall_fit,
        base_verdict: base.verdict,
        vault_verdict: vault.verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMean {
    pub group: Group,
    pub count: usize,
    pub mean_delta: Option<f64>,
}

pub fn grouped_means(rows: &[DeltaReport]) -> Vec<GroupMean> {
    Group::ALL
        .iter()
        .map(|&g| {
            let ds: Vec<f64> = rows
                .iter()
                .filter(|r| r.group == g)
                .map(|r| r.delta)
                .collect();
            GroupMean {
                group: g,
                count: ds.len(),
                mean_delta: (!ds.is_empty()).then(|| ds.iter().sum::<f64>() / ds.len() as f64),
            }
        })
        .collect()
}

/// Markdown delta table with one row per JD and one mean row per group.
pub fn markdown_table(rows: &[DeltaReport]) -> String {
    let mut out =
        String::from("| JD | Group | Base | Vault | Δ | Verdict |\n|---|---|---:|---:|---:|---|\n");
    for r in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {:.1} | {:.1} | {:+.1} | {} -> {} |",
            r.jd_name,
            r.group.as_str(),
            r.base,
            r.vault,
            r.delta,
            r.base_verdict.as_str(),
            r.vault_verdict.as_str()
        );
    }
    for m in grouped_means(rows) {
        let mean = m
            .mean_delta
            .map_or("n/a".to_string(), |d| format!("{d:+.1}"));
        let _ = writeln!(
            out,
            "| mean ({} JDs) | {} | | | {mean} | |",
            m.count,
            m.group.as_str()
        );
    }
    out
}
