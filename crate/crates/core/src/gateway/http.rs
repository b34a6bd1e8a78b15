use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{ChatRequest, ChatResponse, ChatTask, Gateway, GatewayConfig, GatewayError, Usage};

pub const API_KEY_ENV: &str = "TAILOR_API_KEY";

/// Remote backend speaking the common `/chat/completions` + `/embeddings` JSON schema.
pub struct HttpGateway {
    config: GatewayConfig,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireChat {
    choices: Vec<WireChoice>,
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireEmbedding {
    embedding: Vec<f32>,
    #[serde(default)]
    index: usize,
}

#[derive(Deserialize)]
struct WireEmbeddings {
    data: Vec<WireEmbedding>,
}

enum Attempt {
    Retry(String),
    Fatal(GatewayError),
}

impl HttpGateway {
    pub fn new(config: GatewayConfig) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(HttpGateway {
            config,
            client,
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
        })
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.config.base_url.trim_end_matches('/'), path)
    }

    fn post_once(&self, url: &str, body: &serde_json::Value) -> Result<String, Attempt> {
        let mut req = self.client.post(url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| Attempt::Retry(e.to_string()))?;
        if status.is_success() {
            Ok(text)
        } else if status.is_server_error() || status.as_u16() == 429 {
            Err(Attempt::Retry(format!("HTTP {status}")))
        } else {
            Err(Attempt::Fatal(GatewayError::Transport {
                attempts: 1,
                message: format!("HTTP {status}: {text}"),
            }))
        }
    }

    /// POSTs with at most `max_retries` retries and exponential backoff.
    fn post(&self, path: &str, body: serde_json::Value) -> Result<String, GatewayError> {
        let url = self.url(path);
        let attempts = self.config.max_retries + 1;
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.post_once(&url, &body) {
                Ok(text) => return Ok(text),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => {
                    log::warn!("{path} attempt {attempt}/{attempts} failed: {msg}");
                    last = msg;
                    if attempt < attempts {
                        let delay = self.config.backoff_base_ms << (attempt - 1);
                        std::thread::sleep(Duration::from_millis(delay));
                    }
                }
            }
        }
        Err(GatewayError::Transport {
            attempts,
            message: last,
        })
    }
}

impl Gateway for HttpGateway {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, GatewayError> {
        if texts.is_empty() || texts.iter().any(|t| t.trim().is_empty()) {
            return Err(GatewayError::EmptyInput);
        }
        let mut body = json!({ "model": self.config.embed_model, "input": texts });
        if let Some(dim) = self.config.embed_dim {
            body["dimensions"] = json!(dim);
        }
        let raw = self.post("embeddings", body)?;
        let mut parsed: WireEmbeddings =
            serde_json::from_str(&raw).map_err(|e| GatewayError::BadResponse(e.to_string()))?;
        if parsed.data.len() != texts.len() {
            return Err(GatewayError::BadResponse(format!(
                "expected {} embeddings, got {}",
                texts.len(),
                parsed.data.len()
            )));
        }
        parsed.data.sort_by_key(|d| d.index);
        let dim = self.embed_dim();
        if let Some(bad) = parsed.data.iter().find(|d| d.embedding.len() != dim) {
            return Err(GatewayError::BadResponse(format!(
                "embedding dimension {} != configured {dim}",
                bad.embedding.len()
            )));
        }
        Ok(parsed.data.into_iter().map(|d| d.embedding).collect())
    }

    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        if request.messages.is_empty() {
            return Err(GatewayError::EmptyInput);
        }
        let model = if request.task == ChatTask::Review {
            &self.config.review_model
        } else {
            &self.config.chat_model
        };
        let mut messages = Vec::with_capacity(request.messages.len() + 1);
        if let Some(block) = &request.constraints {
            messages.push(json!({ "role": "system", "content": block.render() }));
        }
        for m in &request.messages {
            messages.push(json!({ "role": m.role, "content": m.content }));
        }
        let body = json!({
            "model": model,
            "messages": messages,
            "temperature": self.config.temperature,
            "seed": request.seed,
        });
        let raw = self.post("chat/completions", body)?;
        let parsed: WireChat =
            serde_json::from_str(&raw).map_err(|e| GatewayError::BadResponse(e.to_string()))?;
        let text = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| GatewayError::BadResponse("no choices".into()))?;
        let usage = parsed.usage.map_or(Usage::default(), |u| Usage {
            prompt_tokens: u.prompt_tokens,
            completion_tokens: u.completion_tokens,
        });
        Ok(ChatResponse { text, usage })
    }

    fn embed_dim(&self) -> usize {
        self.config.effective_dim()
    }
}
