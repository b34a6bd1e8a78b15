use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64_with_seed;

use super::{approx_tokens, ChatRequest, ChatResponse, ChatTask, Gateway, GatewayError, Usage};
use crate::ingest::fold;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MockMode {
    /// Echo the request's snippet block back.
    #[default]
    IdentityRewrite,
    /// Replay canned responses from a script; unscripted tasks echo.
    Scripted,
    /// Inject a fabricated employer and an invented metric into generated text.
    Adversarial,
    /// Every chat call fails with a transport error; embeddings still work.
    Offline,
}

/// One canned chat response. `task` restricts the entry to calls of that task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(default)]
    pub task: Option<ChatTask>,
    #[serde(default)]
    pub text: String,
    /// When set, the call fails with this transport message instead.
    #[serde(default)]
    pub error: Option<String>,
}

const REVIEW_OK: &str = r#"{"status":"ok","issues":[]}"#;
const FABRICATED_ORG: &str = "Globex Corporation";

/// Deterministic embedding: signed feature hashing of character 3-grams.
pub fn mock_embedding(text: &str, seed: u64, dim: usize) -> Vec<f32> {
    let padded: Vec<char> = format!(" {} ", fold(text)).chars().collect();
    let mut acc = vec![0f64; dim];
    let mut gram = String::with_capacity(12);
    let n = padded.len().saturating_sub(2).max(1);
    for i in 0..n {
        gram.clear();
        gram.extend(padded.iter().skip(i).take(3));
        let h = xxh3_64_with_seed(gram.as_bytes(), seed);
        let bucket = (h % dim as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        acc[bucket] += sign;
    }
    let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        acc[0] = 1.0;
        return acc.into_iter().map(|v| v as f32).collect();
    }
    acc.into_iter().map(|v| (v / norm) as f32).collect()
}

pub struct MockGateway {
    mode: MockMode,
    seed: u64,
    dim: usize,
    queues: Mutex<HashMap<Option<ChatTask>, VecDeque<ScriptEntry>>>,
    chat_calls: AtomicU64,
    embed_calls: AtomicU64,
    log: Mutex<Vec<ChatRequest>>,
}

impl MockGateway {
    pub fn new(mode: MockMode, seed: u64, dim: usize) -> Self {
        MockGateway {
            mode,
            seed,
            dim,
            queues: Mutex::new(HashMap::new()),
            chat_calls: AtomicU64::new(0),
            embed_calls: AtomicU64::new(0),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn with_script(self, script: Vec<ScriptEntry>) -> Self {
        {
            let mut queues = self.queues.lock();
            for entry in script {
                queues.entry(entry.task).or_default().push_back(entry);
            }
        }
        self
    }

    pub fn chat_calls(&self) -> u64 {
        self.chat_calls.load(Ordering::SeqCst)
    }

    pub fn embed_calls(&self) -> u64 {
        self.embed_calls.load(Ordering::SeqCst)
    }

    /// Every chat request seen so far, in call order.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.log.lock().clone()
    }

    fn echo(request: &ChatRequest) -> String {
        if request.task == ChatTask::Review {
            return REVIEW_OK.to_string();
        }
        request.snippet.clone().unwrap_or_else(|| {
            request
                .messages
                .iter()
                .rev()
                .find(|m| m.role == "user")
                .map(|m| m.content.clone())
                .unwrap_or_default()
        })
    }

    fn adversarial(&self, request: &ChatRequest) -> String {
        let snippet = Self::echo(request);
        let pick = xxh3_64_with_seed(snippet.as_bytes(), self.seed ^ request.seed);
        let metric = [400, 250, 37][(pick % 3) as usize];
        match request.task {
            ChatTask::Rewrite => format!(
                "{}, increasing revenue {metric}% at {FABRICATED_ORG}",
                snippet.trim_end_matches('.')
            ),
            ChatTask::Fallback => format!(
                "Led {} initiatives at {FABRICATED_ORG}, cutting costs {metric}%",
                snippet.trim_end_matches('.')
            ),
            ChatTask::Summary => {
                format!(
                    "{} Previously a director at {FABRICATED_ORG}.",
                    snippet.trim()
                )
            }
            ChatTask::Review | ChatTask::JdExtract => snippet,
        }
    }

    fn scripted(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        let mut queues = self.queues.lock();
        let key = if queues.contains_key(&Some(request.task)) {
            Some(request.task)
        } else if queues.contains_key(&None) {
            None
        } else {
            return Ok(Self::echo(request));
        };
        let entry = queues
            .get_mut(&key)
            .and_then(VecDeque::pop_front)
            .ok_or_else(|| GatewayError::ScriptExhausted(request.task.as_str().into()))?;
        match entry.error {
            Some(message) => Err(GatewayError::Transport {
                attempts: 1,
                message,
            }),
            None => Ok(entry.text),
        }
    }
}

impl Gateway for MockGateway {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, GatewayError> {
        if texts.is_empty() || texts.iter().any(|t| t.trim().is_empty()) {
            return Err(GatewayError::EmptyInput);
        }
        self.embed_calls.fetch_add(1, Ordering::SeqCst);
        Ok(texts
            .iter()
            .map(|t| mock_embedding(t, self.seed, self.dim))
            .collect())
    }

    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        self.chat_calls.fetch_add(1, Ordering::SeqCst);
        self.log.lock().push(request.clone());
        let text = match self.mode {
            MockMode::IdentityRewrite => Self::echo(request),
            MockMode::Adversarial => self.adversarial(request),
            MockMode::Scripted => self.scripted(request)?,
            MockMode::Offline => {
                return Err(GatewayError::Transport {
                    attempts: 1,
                    message: "mock gateway offline".into(),
                })
            }
        };
        let prompt_tokens = request
            .messages
            .iter()
            .map(|m| approx_tokens(&m.content))
            .sum();
        Ok(ChatResponse {
            usage: Usage {
                prompt_tokens,
                completion_tokens: approx_tokens(&text),
            },
            text,
        })
    }

    fn embed_dim(&self) -> usize {
        self.dim
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ChatMessage;

    fn cos(a: &[f32], b: &[f32]) -> f64 {
        a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum()
    }

    fn req(task: ChatTask, snippet: &str) -> ChatRequest {
        ChatRequest {
            task,
            messages: vec![ChatMessage::user(format!("Rewrite:\n{snippet}"))],
            constraints: None,
            snippet: Some(snippet.into()),
            seed: 7,
        }
    }

    #[test]
    fn embedding_is_deterministic_and_unit() {
        let a = mock_embedding("Built Tableau dashboards", 42, 64);
        let b = mock_embedding("Built Tableau dashboards", 42, 64);
        assert_eq!(a, b);
        assert!((cos(&a, &a) - 1.0).abs() < 1e-6);
        assert_ne!(a, mock_embedding("Built Tableau dashboards", 43, 64));
    }

    #[test]
    fn embedding_ranks_shared_trigrams_higher() {
        // Frozen from a one-off run of the mock at seed 42, dim 64.
        let q = mock_embedding("data analyst dashboards", 42, 64);
        let near = cos(&q, &mock_embedding("tableau dashboards analyst", 42, 64));
        let far = cos(&q, &mock_embedding("genome sequencing pipeline", 42, 64));
        assert!(near > far, "{near} vs {far}");
    }

    #[test]
    fn empty_text_rejected() {
        let gw = MockGateway::new(MockMode::IdentityRewrite, 42, 64);
        assert_eq!(gw.embed(&["  ".into()]), Err(GatewayError::EmptyInput));
        assert_eq!(gw.embed(&[]), Err(GatewayError::EmptyInput));
    }

    #[test]
    fn identity_echoes_snippet() {
        let gw = MockGateway::new(MockMode::IdentityRewrite, 42, 64);
        let r = gw
            .chat(&req(ChatTask::Rewrite, "Built SQL reports"))
            .unwrap();
        assert_eq!(r.text, "Built SQL reports");
        let r = gw.chat(&req(ChatTask::Review, "x")).unwrap();
        assert_eq!(r.text, REVIEW_OK);
    }

    #[test]
    fn script_exhausts() {
        let script = vec![
            ScriptEntry {
                task: None,
                text: "one".into(),
                error: None,
            },
            ScriptEntry {
                task: None,
                text: "two".into(),
                error: None,
            },
        ];
        let gw = MockGateway::new(MockMode::Scripted, 42, 64).with_script(script);
        assert_eq!(gw.chat(&req(ChatTask::Rewrite, "a")).unwrap().text, "one");
        assert_eq!(gw.chat(&req(ChatTask::Rewrite, "a")).unwrap().text, "two");
        assert!(matches!(
            gw.chat(&req(ChatTask::Rewrite, "a")),
            Err(GatewayError::ScriptExhausted(_))
        ));
    }

    #[test]
    fn task_scoped_script_leaves_other_tasks_echoing() {
        let script = vec![ScriptEntry {
            task: Some(ChatTask::Review),
            text: "R".into(),
            error: None,
        }];
        let gw = MockGateway::new(MockMode::Scripted, 42, 64).with_script(script);
        assert_eq!(
            gw.chat(&req(ChatTask::Rewrite, "keep")).unwrap().text,
            "keep"
        );
        assert_eq!(gw.chat(&req(ChatTask::Review, "x")).unwrap().text, "R");
        assert!(gw.chat(&req(ChatTask::Review, "x")).is_err());
    }

    #[test]
    fn adversarial_injects_globex() {
        let gw = MockGateway::new(MockMode::Adversarial, 42, 64);
        let r = gw
            .chat(&req(ChatTask::Rewrite, "Built SQL reports"))
            .unwrap();
        assert!(r.text.starts_with("Built SQL reports"));
        assert!(r.text.contains("Globex"));
        assert!(r.text.contains('%'));
    }

    #[test]
    fn offline_fails_chat_only() {
        let gw = MockGateway::new(MockMode::Offline, 42, 64);
        assert!(gw.chat(&req(ChatTask::Rewrite, "a")).is_err());
        assert!(gw.embed(&["a".into()]).is_ok());
    }
}
