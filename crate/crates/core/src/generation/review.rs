use super::{render, Draft, RenderFormat, ReviewStatus, ReviewVerdict};
use crate::gateway::{ChatMessage, ChatRequest, ChatTask, ConstraintBlock, Gateway, Usage};
use crate::jd::JdAnalysis;

pub const REVIEW_SCHEMA: &str = r#"{"status":"ok|needs_rewrite","issues":[{"kind":"coherence|duplication|alignment|phrasing","note":"..."}]}"#;

#[derive(Debug, Clone, PartialEq)]
pub struct ReviewOutcome {
    pub verdict: ReviewVerdict,
    /// Set when the review failed open or a rewrite request was capped.
    pub flag: Option<String>,
    pub usage: Usage,
}

/// Asks the gateway to judge the draft. Fails open: transport errors and
/// malformed responses yield `ok` with a flag. `needs_rewrite` is honoured only
/// on the first pass.
pub fn holistic_review(
    draft: &Draft,
    jd: &JdAnalysis,
    gateway: &dyn Gateway,
    pass_count: u32,
    seed: u64,
) -> ReviewOutcome {
    let body = render(draft, RenderFormat::Txt);
    let requirements: Vec<&str> = jd.elements.iter().map(|e| e.text.as_str()).collect();
    let request = ChatRequest {
        task: ChatTask::Review,
        messages: vec![
            ChatMessage::system(
                "Review the resume for coherence, duplication, alignment with the job, and unnatural phrasing.",
            ),
            ChatMessage::user(format!(
                "Job requirements: {}\nResume:\n{body}",
                requirements.join("; ")
            )),
        ],
        constraints: Some(ConstraintBlock {
            rules: vec!["Report needs_rewrite only for major issues.".into()],
            response_schema: REVIEW_SCHEMA.into(),
        }),
        snippet: None,
        seed,
    };
    let response = match gateway.chat(&request) {
        Ok(r) => r,
        Err(e) => {
            return ReviewOutcome {
                verdict: ReviewVerdict::ok(),
                flag: Some(format!("review unavailable: {e}")),
                usage: Usage::default(),
            }
        }
    };
    let usage = response.usage;
    let parsed: ReviewVerdict = match serde_json::from_str(response.text.trim()) {
        Ok(v) => v,
        Err(e) => {
            return ReviewOutcome {
                verdict: ReviewVerdict::ok(),
                flag: Some(format!("malformed review response: {e}")),
                usage,
            }
        }
    };
    match parsed.status {
        ReviewStatus::NeedsRewrite if parsed.issues.is_empty() => ReviewOutcome {
            verdict: ReviewVerdict::ok(),
            flag: Some("needs_rewrite without issues treated as ok".into()),
            usage,
        },
        ReviewStatus::NeedsRewrite if pass_count >= 2 => ReviewOutcome {
            verdict: ReviewVerdict {
                status: ReviewStatus::Ok,
                issues: parsed.issues,
            },
            flag: Some("rewrite requested after the extra pass; capped".into()),
            usage,
        },
        _ => ReviewOutcome {
            verdict: parsed,
            flag: None,
            usage,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{MockGateway, MockMode, ScriptEntry};
    use crate::generation::{assemble, IssueKind};
    use crate::ingest::{parse_resume_text, DocFormat};
    use crate::jd::{extract_elements, SkillLexicon};

    const NEEDS: &str =
        r#"{"status":"needs_rewrite","issues":[{"kind":"duplication","note":"repeated bullet"}]}"#;

    fn fixture() -> (Draft, JdAnalysis) {
        let base = parse_resume_text(
            "## Experience\n### Acme\n- Built reports\n",
            DocFormat::Markdown,
        )
        .unwrap();
        let jd = extract_elements(
            "Analyst\nDuties:\n- Build reports",
            &SkillLexicon::default(),
        )
        .unwrap();
        (assemble(&base, "t", vec![], vec![], "").unwrap(), jd)
    }

    fn scripted(text: &str) -> MockGateway {
        MockGateway::new(MockMode::Scripted, 42, 64).with_script(vec![ScriptEntry {
            task: Some(ChatTask::Review),
            text: text.into(),
            error: None,
        }])
    }

    #[test]
    fn needs_rewrite_at_pass_one_only() {
        let (d, jd) = fixture();
        let r = holistic_review(&d, &jd, &scripted(NEEDS), 1, 1);
        assert_eq!(r.verdict.status, ReviewStatus::NeedsRewrite);
        assert_eq!(r.verdict.issues[0].kind, IssueKind::Duplication);
        let r = holistic_review(&d, &jd, &scripted(NEEDS), 2, 1);
        assert_eq!(r.verdict.status, ReviewStatus::Ok);
        assert!(r.flag.is_some());
    }

    #[test]
    fn fails_open() {
        let (d, jd) = fixture();
        let r = holistic_review(&d, &jd, &MockGateway::new(MockMode::Offline, 42, 64), 1, 1);
        assert_eq!(r.verdict, ReviewVerdict::ok());
        assert!(r.flag.is_some());
        let r = holistic_review(&d, &jd, &scripted("not json"), 1, 1);
        assert_eq!(r.verdict.status, ReviewStatus::Ok);
        assert!(r.flag.unwrap().starts_with("malformed"));
    }
}
