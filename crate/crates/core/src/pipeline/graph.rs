use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::generation::ReviewStatus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeId {
    IngestResume,
    AnalyzeJd,
    RetrieveVault,
    ScoreConfidence,
    Fallback,
    Rewrite,
    Summarize,
    Assemble,
    Guardrails,
    Polish,
    HolisticReview,
    ScoreAndRender,
}

impl NodeId {
    pub const ORDER: [NodeId; 12] = [
        NodeId::IngestResume,
        NodeId::AnalyzeJd,
        NodeId::RetrieveVault,
        NodeId::ScoreConfidence,
        NodeId::Fallback,
        NodeId::Rewrite,
        NodeId::Summarize,
        NodeId::Assemble,
        NodeId::Guardrails,
        NodeId::Polish,
        NodeId::HolisticReview,
        NodeId::ScoreAndRender,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeId::IngestResume => "ingest_resume",
            NodeId::AnalyzeJd => "analyze_jd",
            NodeId::RetrieveVault => "retrieve_vault",
            NodeId::ScoreConfidence => "score_confidence",
            NodeId::Fallback => "fallback",
            NodeId::Rewrite => "rewrite",
            NodeId::Summarize => "summarize",
            NodeId::Assemble => "assemble",
            NodeId::Guardrails => "guardrails",
            NodeId::Polish => "polish",
            NodeId::HolisticReview => "holistic_review",
            NodeId::ScoreAndRender => "score_and_render",
        }
    }

    /// 1-based position in the fixed order.
    pub fn position(self) -> usize {
        Self::ORDER.iter().position(|n| *n == self).unwrap() + 1
    }

    /// Stage group: ingestion, retrieval/fallback, generation, assembly/review, scoring/output.
    pub fn stage(self) -> u8 {
        match self {
            NodeId::IngestResume | NodeId::AnalyzeJd => 1,
            NodeId::RetrieveVault | NodeId::ScoreConfidence | NodeId::Fallback => 2,
            NodeId::Rewrite | NodeId::Summarize => 3,
            NodeId::Assemble | NodeId::Guardrails | NodeId::Polish | NodeId::HolisticReview => 4,
            NodeId::ScoreAndRender => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConditionalEdge {
    pub from: NodeId,
    pub to: NodeId,
}

/// Fixed linear order plus one conditional back edge from review to rewrite.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Graph {
    pub nodes: Vec<NodeId>,
    pub conditional_edges: Vec<ConditionalEdge>,
}

pub fn build_graph() -> Graph {
    Graph {
        nodes: NodeId::ORDER.to_vec(),
        conditional_edges: vec![ConditionalEdge {
            from: NodeId::HolisticReview,
            to: NodeId::Rewrite,
        }],
    }
}

impl Graph {
    /// Successor of `node`. The back edge is taken iff the verdict asks for a
    /// rewrite and this is the first pass.
    pub fn next(
        &self,
        node: NodeId,
        verdict: Option<ReviewStatus>,
        pass_count: u32,
    ) -> Option<NodeId> {
        if let Some(edge) = self.conditional_edges.iter().find(|e| e.from == node) {
            if verdict == Some(ReviewStatus::NeedsRewrite) && pass_count == 1 {
                return Some(edge.to);
            }
        }
        let i = self.nodes.iter().position(|n| *n == node)?;
        self.nodes.get(i + 1).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: usize,
    pub node_id: NodeId,
    pub pass: u32,
    pub started: DateTime<Utc>,
    pub ended: DateTime<Utc>,
    pub summary: String,
    pub counters: BTreeMap<String, u64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_nodes_one_conditional_edge() {
        let g = build_graph();
        assert_eq!(g.nodes.len(), 12);
        assert_eq!(g.conditional_edges.len(), 1);
        assert_eq!(NodeId::HolisticReview.position(), 11);
        assert_eq!(NodeId::Rewrite.position(), 6);
    }

    #[test]
    fn back_edge_only_on_first_pass() {
        let g = build_graph();
        let review = NodeId::HolisticReview;
        assert_eq!(
            g.next(review, Some(ReviewStatus::NeedsRewrite), 1),
            Some(NodeId::Rewrite)
        );
        assert_eq!(
            g.next(review, Some(ReviewStatus::NeedsRewrite), 2),
            Some(NodeId::ScoreAndRender)
        );
        assert_eq!(
            g.next(review, Some(ReviewStatus::Ok), 1),
            Some(NodeId::ScoreAndRender)
        );
        assert_eq!(g.next(NodeId::ScoreAndRender, None, 1), None);
    }
}
