//! Chat-completion and embedding backends behind one trait.
//!
//! Everything above this module talks to `dyn Gateway`; tests use [`MockGateway`],
//! deployments use [`HttpGateway`].

mod http;
mod mock;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use http::HttpGateway;
pub use mock::{mock_embedding, MockGateway, MockMode, ScriptEntry};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("embedding input is empty")]
    EmptyInput,
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("scripted responses exhausted for task {0}")]
    ScriptExhausted(String),
    #[error("malformed backend response: {0}")]
    BadResponse(String),
    #[error("gateway configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChatTask {
    Rewrite,
    Summary,
    Fallback,
    Review,
    JdExtract,
}

impl ChatTask {
    pub fn as_str(self) -> &'static str {
        match self {
            ChatTask::Rewrite => "rewrite",
            ChatTask::Summary => "summary",
            ChatTask::Fallback => "fallback",
            ChatTask::Review => "review",
            ChatTask::JdExtract => "jd_extract",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }
}

/// Forbidden-content rules plus the tag of the expected response shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintBlock {
    pub rules: Vec<String>,
    pub response_schema: String,
}

impl ConstraintBlock {
    pub fn render(&self) -> String {
        let mut out = String::from("Constraints:\n");
        for rule in &self.rules {
            out.push_str("- ");
            out.push_str(rule);
            out.push('\n');
        }
        out.push_str(&format!("Respond with: {}", self.response_schema));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub task: ChatTask,
    pub messages: Vec<ChatMessage>,
    pub constraints: Option<ConstraintBlock>,
    /// The source text being transformed, also embedded in the last user message.
    pub snippet: Option<String>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub usage: Usage,
}

pub trait Gateway: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, GatewayError>;
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError>;
    fn embed_dim(&self) -> usize;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Http,
    #[default]
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub backend: Backend,
    pub base_url: String,
    pub chat_model: String,
    pub review_model: String,
    pub embed_model: String,
    /// Defaults to 1536 for http and 64 for mock.
    pub embed_dim: Option<usize>,
    pub seed: u64,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    pub temperature: f64,
    pub mock_mode: MockMode,
    pub script_path: Option<PathBuf>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            backend: Backend::Mock,
            base_url: "https://api.openai.com/v1".into(),
            chat_model: "gpt-4o".into(),
            review_model: "gpt-5.4".into(),
            embed_model: "text-embedding-3-small".into(),
            embed_dim: None,
            seed: 42,
            timeout_ms: 30_000,
            max_retries: 3,
            backoff_base_ms: 250,
            temperature: 0.0,
            mock_mode: MockMode::IdentityRewrite,
            script_path: None,
        }
    }
}

impl GatewayConfig {
    pub fn mock(mode: MockMode) -> Self {
        GatewayConfig {
            mock_mode: mode,
            ..Default::default()
        }
    }

    pub fn effective_dim(&self) -> usize {
        self.embed_dim.unwrap_or(match self.backend {
            Backend::Http => 1536,
            Backend::Mock => 64,
        })
    }

    pub fn build(&self) -> Result<Arc<dyn Gateway>, GatewayError> {
        if self.effective_dim() == 0 {
            return Err(GatewayError::Config("embed_dim must be positive".into()));
        }
        Ok(match self.backend {
            Backend::Mock => {
                let mut gw = MockGateway::new(self.mock_mode, self.seed, self.effective_dim());
                if let Some(path) = &self.script_path {
                    let raw = std::fs::read_to_string(path).map_err(|e| {
                        GatewayError::Config(format!("reading {}: {e}", path.display()))
                    })?;
                    let script: Vec<ScriptEntry> = serde_json::from_str(&raw)
                        .map_err(|e| GatewayError::Config(format!("script file: {e}")))?;
                    gw = gw.with_script(script);
                }
                Arc::new(gw)
            }
            Backend::Http => Arc::new(HttpGateway::new(self.clone())?),
        })
    }
}

/// Rough whitespace token count used for usage accounting by the mock.
pub(crate) fn approx_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}
