//! The tailoring pipeline: twelve nodes threading one [`RunState`], with a
//! single bounded review-to-rewrite loop.

mod graph;

use std::collections::{BTreeMap, HashMap};

use chrono::Utc;
use serde::{Deserialize, Serialize};

pub use graph::{build_graph, ConditionalEdge, Graph, NodeId, TraceEvent};

use crate::ats::{ats_report, coverage, AtsReport};
use crate::gateway::{Gateway, GatewayError, Usage};
use crate::generation::{
    assemble, fallback_for, guardrails_check, holistic_review, polish, render, rewrite_snippets,
    summarize, Allowlist, Draft, DraftBullet, FallbackConfig, FallbackItem, GuardrailFinding,
    RenderFormat, RetrievedSnippet, ReviewStatus, ReviewVerdict, SourceIndex,
};
use crate::ingest::{
    chunkize, parse_resume_text, Chunk, ChunkLevel, DocFormat, ResumeDoc, SectionKind,
};
use crate::jd::{extract_elements, llm_extract, JdAnalysis, JdElement, SkillLexicon};
use crate::matcher::{
    filter_by_threshold, lexical_score, semantic_score, MatchScore, ScoredSnippet, DEFAULT_ALPHA,
    DEFAULT_TAU,
};
use crate::vault::{Collection, QueryResult, Vault};

pub const MAX_EXTRA_REVIEW_PASSES: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub alpha: f64,
    pub tau: f64,
    pub tau_fallback: f64,
    pub retrieval_enabled: bool,
    /// Retrieval depth per JD element.
    pub k: usize,
    pub max_extra_review_passes: u32,
    pub seed: u64,
    /// Allow tier-2 (model-written) fallback highlights.
    pub llm_fallback: bool,
    /// Use the gateway for JD element extraction instead of the rules.
    pub llm_jd_extraction: bool,
    pub formats: Vec<RenderFormat>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            alpha: DEFAULT_ALPHA,
            tau: DEFAULT_TAU,
            tau_fallback: 0.60,
            retrieval_enabled: true,
            k: 8,
            max_extra_review_passes: MAX_EXTRA_REVIEW_PASSES,
            seed: 42,
            llm_fallback: false,
            llm_jd_extraction: false,
            formats: RenderFormat::ALL.to_vec(),
        }
    }
}

impl RunConfig {
    /// Returns the offending field name and a message.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("tau", self.tau),
            ("tau_fallback", self.tau_fallback),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err((name, format!("{v} is outside [0, 1]")));
            }
        }
        if self.tau_fallback > self.tau {
            return Err((
                "tau_fallback",
                format!("{} exceeds tau {}", self.tau_fallback, self.tau),
            ));
        }
        if self.k == 0 {
            return Err(("k", "must be at least 1".into()));
        }
        if self.max_extra_review_passes != MAX_EXTRA_REVIEW_PASSES {
            return Err(("max_extra_review_passes", "is fixed at 1".into()));
        }
        Ok(())
    }

    pub fn condition(&self) -> Condition {
        if self.retrieval_enabled {
            Condition::Vault
        } else {
            Condition::Baseline
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Baseline,
    Vault,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Baseline => "baseline",
            Condition::Vault => "vault",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInputs {
    pub jd_text: String,
    pub resume_text: String,
    pub resume_format: DocFormat,
    /// Doc id given to the base resume's chunks.
    pub base_doc_id: String,
}

impl RunInputs {
    pub fn markdown(jd_text: impl Into<String>, resume_text: impl Into<String>) -> Self {
        RunInputs {
            jd_text: jd_text.into(),
            resume_text: resume_text.into(),
            resume_format: DocFormat::Markdown,
            base_doc_id: "target".into(),
        }
    }
}

/// Everything a run produced. Fields are filled in node order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub run_id: String,
    pub config: RunConfig,
    pub condition: Condition,
    pub base_doc_id: String,
    pub jd: Option<JdAnalysis>,
    pub base_resume: Option<ResumeDoc>,
    pub base_chunks: Vec<Chunk>,
    pub retrieved: Vec<QueryResult>,
    /// chunk id -> elements whose query returned it.
    pub matched: BTreeMap<String, Vec<String>>,
    pub scored: Vec<ScoredSnippet>,
    /// Kept snippets with their texts, in confidence order.
    pub snippets: Vec<RetrievedSnippet>,
    /// Snippets below tau, kept for the trace and tier-1 fallback.
    pub dropped: Vec<RetrievedSnippet>,
    pub uncovered: Vec<String>,
    pub fallback_items: Vec<FallbackItem>,
    /// Rewritten vault bullets with the employer of their source.
    pub rewritten: Vec<(DraftBullet, Option<String>)>,
    pub summary_text: String,
    pub draft: Option<Draft>,
    pub findings: Vec<GuardrailFinding>,
    pub verdict: Option<ReviewVerdict>,
    pub pass_count: u32,
    pub ats: Option<AtsReport>,
    pub rendered: BTreeMap<RenderFormat, String>,
    pub trace: Vec<TraceEvent>,
    /// Degradations recorded along the way (gateway failures, capped reviews).
    pub flags: Vec<String>,
    pub usage: Usage,
}

pub type RunResult = RunState;

impl RunState {
    fn new(run_id: &str, config: &RunConfig, base_doc_id: &str) -> Self {
        RunState {
            run_id: run_id.to_string(),
            config: config.clone(),
            condition: config.condition(),
            base_doc_id: base_doc_id.to_string(),
            jd: None,
            base_resume: None,
            base_chunks: Vec::new(),
            retrieved: Vec::new(),
            matched: BTreeMap::new(),
            scored: Vec::new(),
            snippets: Vec::new(),
            dropped: Vec::new(),
            uncovered: Vec::new(),
            fallback_items: Vec::new(),
            rewritten: Vec::new(),
            summary_text: String::new(),
            draft: None,
            findings: Vec::new(),
            verdict: None,
            pass_count: 1,
            ats: None,
            rendered: BTreeMap::new(),
            trace: Vec::new(),
            flags: Vec::new(),
            usage: Usage::default(),
        }
    }

    fn jd(&self) -> &JdAnalysis {
        self.jd.as_ref().expect("analyze_jd runs first")
    }

    fn base(&self) -> &ResumeDoc {
        self.base_resume.as_ref().expect("ingest_resume runs first")
    }

    fn add_usage(&mut self, u: Usage) {
        self.usage.prompt_tokens += u.prompt_tokens;
        self.usage.completion_tokens += u.completion_tokens;
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid run config: {field} {message}")]
    InvalidConfig {
        field: &'static str,
        message: String,
    },
    #[error("node {node} failed: {cause}")]
    NodeFailure {
        node: &'static str,
        cause: String,
        /// Events recorded before the failure.
        trace: Vec<TraceEvent>,
    },
}

impl PipelineError {
    pub fn node(&self) -> Option<&'static str> {
        match self {
            PipelineError::NodeFailure { node, .. } => Some(node),
            _ => None,
        }
    }
}

/// Base-resume summary lines joined into one paragraph.
fn base_summary(doc: &ResumeDoc) -> String {
    doc.sections
        .iter()
        .filter(|s| s.kind == SectionKind::Summary)
        .flat_map(|s| s.lines().iter().map(String::as_str))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Content the ATS scorer may see: base chunks below document level plus
/// vault-sourced bullets that made it into experience entries.
pub fn scoring_inputs(base_chunks: &[Chunk], draft: &Draft) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = base_chunks
        .iter()
        .filter(|c| c.level != ChunkLevel::Document)
        .map(|c| (c.chunk_id.clone(), c.text.clone()))
        .collect();
    for entry in draft.entries() {
        for b in entry.bullets() {
            if b.provenance.tag.is_vault() {
                let id = b
                    .provenance
                    .source_chunk
                    .clone()
                    .unwrap_or_else(|| b.item_id.clone());
                out.push((id, b.text.clone()));
            }
        }
    }
    out
}

/// ATS report for a finished draft. Highlights are never read.
pub fn score_draft(
    base_chunks: &[Chunk],
    draft: &Draft,
    jd: &JdAnalysis,
    gateway: &dyn Gateway,
    alpha: f64,
) -> Result<AtsReport, GatewayError> {
    let cov = coverage(&scoring_inputs(base_chunks, draft), jd, gateway, alpha)?;
    Ok(ats_report(&cov))
}

type Counters = BTreeMap<String, u64>;

fn counters<const N: usize>(pairs: [(&str, usize); N]) -> Counters {
    pairs
        .into_iter()
        .map(|(k, v)| (k.to_string(), v as u64))
        .collect()
}

/// Runs the graph against explicit vault, gateway and lexicon handles.
pub struct Pipeline<'a> {
    pub graph: Graph,
    pub vault: &'a Vault,
    pub gateway: &'a dyn Gateway,
    pub lexicon: &'a SkillLexicon,
}

impl<'a> Pipeline<'a> {
    pub fn new(vault: &'a Vault, gateway: &'a dyn Gateway, lexicon: &'a SkillLexicon) -> Self {
        Pipeline {
            graph: build_graph(),
            vault,
            gateway,
            lexicon,
        }
    }

    pub fn run(
        &self,
        run_id: &str,
        inputs: &RunInputs,
        config: &RunConfig,
    ) -> Result<RunResult, PipelineError> {
        self.run_observed(run_id, inputs, config, &mut |_| {})
    }

    /// As [`Pipeline::run`], calling `observe` after each node completes.
    pub fn run_observed(
        &self,
        run_id: &str,
        inputs: &RunInputs,
        config: &RunConfig,
        observe: &mut dyn FnMut(&TraceEvent),
    ) -> Result<RunResult, PipelineError> {
        config
            .validate()
            .map_err(|(field, message)| PipelineError::InvalidConfig { field, message })?;
        let mut state = RunState::new(run_id, config, &inputs.base_doc_id);
        let mut node = Some(NodeId::IngestResume);
        while let Some(n) = node {
            let started = Utc::now();
            let result = self.exec(n, inputs, &mut state);
            let (summary, counters) = match result {
                Ok(v) => v,
                Err(cause) => {
                    log::error!("run {run_id}: node {} failed: {cause}", n.as_str());
                    return Err(PipelineError::NodeFailure {
                        node: n.as_str(),
                        cause,
                        trace: state.trace,
                    });
                }
            };
            let event = TraceEvent {
                seq: state.trace.len(),
                node_id: n,
                pass: state.pass_count,
                started,
                ended: Utc::now(),
                summary,
                counters,
            };
            observe(&event);
            state.trace.push(event);
            node = self.graph.next(
                n,
                state.verdict.as_ref().map(|v| v.status),
                state.pass_count,
            );
            if n == NodeId::HolisticReview && node == Some(NodeId::Rewrite) {
                state.pass_count += 1;
            }
        }
        Ok(state)
    }

    fn exec(
        &self,
        node: NodeId,
        inputs: &RunInputs,
        st: &mut RunState,
    ) -> Result<(String, Counters), String> {
        match node {
            NodeId::IngestResume => self.ingest_resume(inputs, st),
            NodeId::AnalyzeJd => self.analyze_jd(inputs, st),
            NodeId::RetrieveVault => self.retrieve_vault(st),
            NodeId::ScoreConfidence => self.score_confidence(st),
            NodeId::Fallback => self.fallback(st),
            NodeId::Rewrite => self.rewrite(st),
            NodeId::Summarize => self.summarize(st),
            NodeId::Assemble => self.assemble(st),
            NodeId::Guardrails => self.guardrails(st),
            NodeId::Polish => self.polish(st),
            NodeId::HolisticReview => self.review(st),
            NodeId::ScoreAndRender => self.score_and_render(st),
        }
    }

    fn ingest_resume(
        &self,
        inputs: &RunInputs,
        st: &mut RunState,
    ) -> Result<(String, Counters), String> {
        let doc = parse_resume_text(&inputs.resume_text, inputs.resume_format)
            .map_err(|e| e.to_string())?;
        st.base_chunks = chunkize(&doc, &inputs.base_doc_id);
        let summary = format!(
            "{} sections, {} bullets",
            doc.sections.len(),
            doc.bullet_count()
        );
        let c = counters([
            ("sections", doc.sections.len()),
            ("chunks", st.base_chunks.len()),
        ]);
        st.base_resume = Some(doc);
        Ok((summary, c))
    }

    fn analyze_jd(
        &self,
        inputs: &RunInputs,
        st: &mut RunState,
    ) -> Result<(String, Counters), String> {
        let jd = if st.config.llm_jd_extraction {
            let x = llm_extract(&inputs.jd_text, self.lexicon, self.gateway, st.config.seed)
                .map_err(|e| e.to_string())?;
            if x.fell_back {
                st.flags.push("jd extraction fell back to rules".into());
            }
            x.analysis
        } else {
            extract_elements(&inputs.jd_text, self.lexicon).map_err(|e| e.to_string())?
        };
        let [s, r, q] = jd.counts();
        let summary = format!(
            "{} elements ({s} skill, {r} responsibility, {q} qualification)",
            jd.elements.len()
        );
        st.jd = Some(jd);
        Ok((
            summary,
            counters([
                ("skills", s),
                ("responsibilities", r),
                ("qualifications", q),
            ]),
        ))
    }

    fn retrieve_vault(&self, st: &mut RunState) -> Result<(String, Counters), String> {
        st.retrieved.clear();
        st.matched.clear();
        if !st.config.retrieval_enabled {
            return Ok((
                "retrieval disabled".into(),
                counters([("chunks_retrieved", 0)]),
            ));
        }
        let texts: Vec<String> = st.jd().elements.iter().map(|e| e.text.clone()).collect();
        if texts.is_empty() || self.vault.is_empty() {
            return Ok((
                "nothing to retrieve".into(),
                counters([("chunks_retrieved", 0)]),
            ));
        }
        let vectors = self
            .gateway
            .embed(&texts)
            .map_err(|e| format!("embedding JD elements: {e}"))?;
        let mut best: HashMap<String, QueryResult> = HashMap::new();
        let mut matched: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut queries = 0;
        let ids: Vec<String> = st
            .jd()
            .elements
            .iter()
            .map(|e| e.element_id.clone())
            .collect();
        for (v, element_id) in vectors.iter().zip(ids) {
            let hits = self
                .vault
                .query_levels(v, &Collection::ALL, &[ChunkLevel::Bullet], st.config.k)
                .map_err(|e| e.to_string())?;
            queries += 1;
            for h in hits {
                matched
                    .entry(h.chunk_id.clone())
                    .or_default()
                    .push(element_id.clone());
                match best.get(&h.chunk_id) {
                    Some(prev) if prev.cosine >= h.cosine => {}
                    _ => {
                        best.insert(h.chunk_id.clone(), h);
                    }
                }
            }
        }
        let mut hits: Vec<QueryResult> = best.into_values().collect();
        hits.sort_by(|a, b| {
            b.cosine
                .total_cmp(&a.cosine)
                .then_with(|| a.chunk_id.cmp(&b.chunk_id))
        });
        for (i, h) in hits.iter_mut().enumerate() {
            h.rank = i + 1;
        }
        let n = hits.len();
        st.retrieved = hits;
        st.matched = matched;
        Ok((
            format!("{n} distinct chunks from {queries} queries"),
            counters([("queries", queries), ("chunks_retrieved", n)]),
        ))
    }

    fn score_confidence(&self, st: &mut RunState) -> Result<(String, Counters), String> {
        st.scored.clear();
        st.snippets.clear();
        st.dropped.clear();
        let mut dropped_snippets = Vec::new();
        if !st.retrieved.is_empty() {
            let matched = &st.matched;
            let elements = &st.jd().elements;
            let mut scored = Vec::with_capacity(st.retrieved.len());
            for hit in &st.retrieved {
                let Some((_, vc)) = self.vault.get(&hit.chunk_id) else {
                    return Err(format!("retrieved chunk {} vanished", hit.chunk_id));
                };
                let lex = lexical_score(&vc.chunk.text, elements);
                let score = MatchScore::new(semantic_score(hit.cosine), lex.value, st.config.alpha)
                    .map_err(|e| e.to_string())?;
                let ids = matched.get(&hit.chunk_id).cloned().unwrap_or_default();
                scored.push(ScoredSnippet::new(
                    hit.chunk_id.clone(),
                    ids,
                    score,
                    st.config.tau,
                ));
            }
            scored.sort_by(|a, b| {
                b.score
                    .confidence
                    .total_cmp(&a.score.confidence)
                    .then_with(|| a.chunk_id.cmp(&b.chunk_id))
            });
            let (kept, dropped) = filter_by_threshold(scored.clone(), st.config.tau);
            let to_snippet = |s: &ScoredSnippet| {
                let (_, vc) = self.vault.get(&s.chunk_id).expect("checked above");
                RetrievedSnippet {
                    chunk_id: s.chunk_id.clone(),
                    doc_id: vc.chunk.doc_id.clone(),
                    text: vc.chunk.text.clone(),
                    employer: vc.chunk.employer.clone(),
                    provenance: vc.provenance,
                    confidence: s.score.confidence,
                    matched_elements: s.matched_elements.clone(),
                }
            };
            st.snippets = kept.iter().map(to_snippet).collect();
            dropped_snippets = dropped.iter().map(to_snippet).collect();
            st.scored = scored;
        }
        let covered: std::collections::HashSet<&str> = st
            .snippets
            .iter()
            .flat_map(|s| s.matched_elements.iter().map(String::as_str))
            .collect();
        st.uncovered = st
            .jd()
            .elements
            .iter()
            .filter(|e| !covered.contains(e.element_id.as_str()))
            .map(|e| e.element_id.clone())
            .collect();
        st.dropped = dropped_snippets;
        let kept = st.snippets.len();
        Ok((
            format!(
                "{kept} of {} snippets kept at tau {}",
                st.scored.len(),
                st.config.tau
            ),
            counters([
                ("snippets_scored", st.scored.len()),
                ("snippets_kept", kept),
                ("uncovered", st.uncovered.len()),
            ]),
        ))
    }

    fn fallback(&self, st: &mut RunState) -> Result<(String, Counters), String> {
        let jd = st.jd();
        let uncovered: Vec<JdElement> = st
            .uncovered
            .iter()
            .filter_map(|id| jd.element(id).cloned())
            .collect();
        let config = FallbackConfig {
            tau: st.config.tau,
            tau_fallback: st.config.tau_fallback,
            seed: st.config.seed,
        };
        let gateway = st.config.llm_fallback.then_some(self.gateway);
        let (items, usage) = fallback_for(&uncovered, &st.dropped, gateway, &config);
        st.add_usage(usage);
        let tier = |t: u8| items.iter().filter(|i| i.tier == t).count();
        let c = counters([
            ("tier1", tier(1)),
            ("tier2", tier(2)),
            ("tier3", tier(3)),
            (
                "tokens",
                (usage.prompt_tokens + usage.completion_tokens) as usize,
            ),
        ]);
        let summary = format!(
            "{} fallback items for {} uncovered elements",
            items.len(),
            uncovered.len()
        );
        st.fallback_items = items;
        Ok((summary, c))
    }

    fn rewrite(&self, st: &mut RunState) -> Result<(String, Counters), String> {
        let feedback = match &st.verdict {
            Some(v) if st.pass_count > 1 => {
                let notes: Vec<&str> = v.issues.iter().map(|i| i.note.as_str()).collect();
                Some(notes.join("; "))
            }
            _ => None,
        };
        let out = rewrite_snippets(
            &st.snippets,
            st.jd(),
            self.gateway,
            st.config.seed,
            feedback.as_deref(),
        );
        st.add_usage(out.usage);
        for id in &out.passthrough {
            st.flags
                .push(format!("rewrite of {id} passed through verbatim"));
        }
        let c = counters([
            ("bullets", out.bullets.len()),
            ("passthrough", out.passthrough.len()),
            (
                "tokens",
                (out.usage.prompt_tokens + out.usage.completion_tokens) as usize,
            ),
        ]);
        let summary = format!(
            "{} bullets rewritten, {} passed through",
            out.bullets.len(),
            out.passthrough.len()
        );
        st.rewritten = out.bullets;
        Ok((summary, c))
    }

    fn summarize(&self, st: &mut RunState) -> Result<(String, Counters), String> {
        let base = base_summary(st.base());
        let (text, flag, usage) = summarize(&base, st.jd(), self.gateway, st.config.seed);
        st.add_usage(usage);
        let summary = match &flag {
            Some(f) => format!("summary kept from base resume: {f}"),
            None => format!("summary of {} chars", text.len()),
        };
        if let Some(f) = flag {
            st.flags.push(format!("summary: {f}"));
        }
        st.summary_text = text;
        Ok((
            summary,
            counters([(
                "tokens",
                (usage.prompt_tokens + usage.completion_tokens) as usize,
            )]),
        ))
    }

    fn assemble(&self, st: &mut RunState) -> Result<(String, Counters), String> {
        let draft = assemble(
            st.base(),
            &st.base_doc_id,
            st.rewritten.clone(),
            st.fallback_items.clone(),
            &st.summary_text,
        )
        .map_err(|e| e.to_string())?;
        let entries = draft.entry_texts().len();
        let highlights = draft.tailored_highlights.len();
        st.draft = Some(draft);
        Ok((
            format!("{entries} entry bullets, {highlights} highlights"),
            counters([("entry_bullets", entries), ("highlights", highlights)]),
        ))
    }

    fn guardrails(&self, st: &mut RunState) -> Result<(String, Counters), String> {
        let base = st.base();
        let mut employers = base.employers();
        let mut sources = SourceIndex::default();
        for c in st
            .base_chunks
            .iter()
            .filter(|c| c.level == ChunkLevel::Bullet)
        {
            sources.add(&c.chunk_id, c.employer.as_deref(), &c.text);
        }
        if st.config.retrieval_enabled {
            for (_, vc) in self.vault.scan() {
                sources.add(
                    &vc.chunk.chunk_id,
                    vc.chunk.employer.as_deref(),
                    &vc.chunk.text,
                );
                if let Some(e) = &vc.chunk.employer {
                    employers.push(e.clone());
                }
            }
        }
        let allow = Allowlist::new(employers);
        let element_texts: BTreeMap<String, String> = st
            .jd()
            .elements
            .iter()
            .map(|e| (e.element_id.clone(), e.text.clone()))
            .collect();
        let draft = st.draft.as_ref().ok_or("no draft to check")?;
        let (checked, findings) = guardrails_check(
            draft,
            &allow,
            self.lexicon,
            &sources,
            &element_texts,
            &base_summary(base),
        )
        .map_err(|e| e.to_string())?;
        let summary = format!("{} findings", findings.len());
        let c = counters([("findings", findings.len())]);
        st.draft = Some(checked);
        st.findings = findings;
        Ok((summary, c))
    }

    fn polish(&self, st: &mut RunState) -> Result<(String, Counters), String> {
        let draft = st.draft.as_ref().ok_or("no draft to polish")?;
        let before = draft.entry_texts().len();
        let polished = polish(draft);
        let after = polished.entry_texts().len();
        st.draft = Some(polished);
        Ok((
            format!("{} duplicate bullets removed", before - after),
            counters([("duplicates_removed", before - after)]),
        ))
    }

    fn review(&self, st: &mut RunState) -> Result<(String, Counters), String> {
        let draft = st.draft.as_ref().ok_or("no draft to review")?;
        let out = holistic_review(draft, st.jd(), self.gateway, st.pass_count, st.config.seed);
        st.add_usage(out.usage);
        if let Some(f) = &out.flag {
            st.flags.push(format!("review: {f}"));
        }
        let status = match out.verdict.status {
            ReviewStatus::Ok => "ok",
            ReviewStatus::NeedsRewrite => "needs_rewrite",
        };
        let summary = match &out.flag {
            Some(f) => format!("{status} ({f})"),
            None => status.to_string(),
        };
        let c = counters([
            ("issues", out.verdict.issues.len()),
            (
                "tokens",
                (out.usage.prompt_tokens + out.usage.completion_tokens) as usize,
            ),
        ]);
        st.verdict = Some(out.verdict);
        Ok((summary, c))
    }

    fn score_and_render(&self, st: &mut RunState) -> Result<(String, Counters), String> {
        let draft = st.draft.as_ref().ok_or("no draft to score")?;
        let report = score_draft(
            &st.base_chunks,
            draft,
            st.jd(),
            self.gateway,
            st.config.alpha,
        )
        .map_err(|e| format!("scoring: {e}"))?;
        let mut rendered = BTreeMap::new();
        for f in &st.config.formats {
            rendered.insert(*f, render(draft, *f));
        }
        let summary = format!(
            "overall {:.1}, best {:.1} ({}), {}",
            report.overall_fit,
            report.best_profile,
            report.best_profile_name,
            report.verdict.as_str()
        );
        let c = counters([
            (
                "eligible_chunks",
                scoring_inputs(&st.base_chunks, draft).len(),
            ),
            ("formats", rendered.len()),
        ]);
        st.ats = Some(report);
        st.rendered = rendered;
        Ok((summary, c))
    }
}
