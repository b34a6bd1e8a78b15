//! HttpGateway against a local stub of the chat/embeddings endpoints.

mod common;

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

use tailor_core::engine::{Engine, EngineError};
use tailor_core::gateway::{
    Backend, ChatMessage, ChatRequest, ChatTask, GatewayConfig, GatewayError,
};
use tailor_core::jd::SkillLexicon;
use tailor_core::pipeline::RunConfig;
use tailor_core::runstore::RunStatus;

#[derive(Clone, Default)]
struct Stub {
    /// Status codes served before falling back to `default_status`.
    plan: Arc<Mutex<VecDeque<u16>>>,
    default_status: u16,
    dim: usize,
    requests: Arc<Mutex<Vec<(String, Value)>>>,
}

impl Stub {
    fn new(dim: usize, plan: &[u16], default_status: u16) -> Self {
        Stub {
            plan: Arc::new(Mutex::new(plan.iter().copied().collect())),
            default_status,
            dim,
            requests: Arc::default(),
        }
    }

    fn next_status(&self, path: &str, body: &Value) -> StatusCode {
        self.requests
            .lock()
            .unwrap()
            .push((path.to_string(), body.clone()));
        let code = self
            .plan
            .lock()
            .unwrap()
            .pop_front()
            .unwrap_or(self.default_status);
        StatusCode::from_u16(code).unwrap()
    }

    fn hits(&self, path: &str) -> usize {
        self.requests
            .lock()
            .unwrap()
            .iter()
            .filter(|(p, _)| p == path)
            .count()
    }
}

async fn embeddings(
    State(stub): State<Stub>,
    Json(body): Json<Value>,
) -> (StatusCode, Json<Value>) {
    let status = stub.next_status("embeddings", &body);
    if !status.is_success() {
        return (status, Json(json!({"error": "stubbed failure"})));
    }
    let data: Vec<Value> = body["input"]
        .as_array()
        .unwrap()
        .iter()
        .enumerate()
        .rev()
        .map(|(i, text)| {
            let seed = text.as_str().unwrap().len();
            let v: Vec<f32> = (0..stub.dim)
                .map(|j| ((seed + j) % 7) as f32 + 1.0)
                .collect();
            json!({"index": i, "embedding": v})
        })
        .collect();
    (status, Json(json!({"data": data})))
}

async fn chat(State(stub): State<Stub>, Json(body): Json<Value>) -> (StatusCode, Json<Value>) {
    let status = stub.next_status("chat/completions", &body);
    if !status.is_success() {
        return (status, Json(json!({"error": "stubbed failure"})));
    }
    let reply = format!("reply from {}", body["model"].as_str().unwrap());
    (
        status,
        Json(json!({
            "choices": [{"message": {"role": "assistant", "content": reply}}],
            "usage": {"prompt_tokens": 11, "completion_tokens": 3}
        })),
    )
}

/// Serves the stub on an ephemeral port from a background runtime.
fn spawn(stub: Stub) -> String {
    let app = Router::new()
        .route("/v1/embeddings", post(embeddings))
        .route("/v1/chat/completions", post(chat))
        .with_state(stub);
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    format!("http://{}/v1", rx.recv().unwrap())
}

fn config(base_url: String, max_retries: u32) -> GatewayConfig {
    GatewayConfig {
        backend: Backend::Http,
        base_url,
        embed_dim: Some(64),
        max_retries,
        backoff_base_ms: 1,
        timeout_ms: 5_000,
        ..GatewayConfig::default()
    }
}

fn request(task: ChatTask) -> ChatRequest {
    ChatRequest {
        task,
        messages: vec![ChatMessage::user("Built weekly dashboards")],
        constraints: None,
        snippet: None,
        seed: 42,
    }
}

#[test]
fn retries_server_errors_and_rate_limits() {
    let stub = Stub::new(64, &[500, 429, 503], 200);
    let gw = config(spawn(stub.clone()), 3).build().unwrap();
    let vectors = gw.embed(&["a".into(), "bbb".into()]).unwrap();
    assert_eq!(stub.hits("embeddings"), 4);
    assert_eq!(vectors.len(), 2);
    assert_eq!(vectors[0].len(), 64);
    // the stub answers in reverse order; results follow input order
    assert_eq!(vectors[0][0], 2.0);
    assert_eq!(vectors[1][0], 4.0);
    assert_eq!(stub.requests.lock().unwrap()[0].1["dimensions"], 64);
}

#[test]
fn gives_up_after_max_retries() {
    let stub = Stub::new(64, &[], 500);
    let gw = config(spawn(stub.clone()), 2).build().unwrap();
    match gw.embed(&["a".into()]) {
        Err(GatewayError::Transport { attempts: 3, .. }) => {}
        other => panic!("{other:?}"),
    }
    assert_eq!(stub.hits("embeddings"), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let stub = Stub::new(64, &[400], 200);
    let gw = config(spawn(stub.clone()), 3).build().unwrap();
    match gw.chat(&request(ChatTask::Rewrite)) {
        Err(GatewayError::Transport {
            attempts: 1,
            message,
        }) => assert!(message.contains("400"), "{message}"),
        other => panic!("{other:?}"),
    }
    assert_eq!(stub.hits("chat/completions"), 1);
}

#[test]
fn wrong_dimension_is_rejected() {
    let stub = Stub::new(32, &[], 200);
    let gw = config(spawn(stub), 0).build().unwrap();
    match gw.embed(&["a".into()]) {
        Err(GatewayError::BadResponse(m)) => assert!(m.contains("32"), "{m}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn review_uses_the_review_model() {
    let stub = Stub::new(64, &[], 200);
    let gw = config(spawn(stub.clone()), 0).build().unwrap();
    let rewrite = gw.chat(&request(ChatTask::Rewrite)).unwrap();
    let review = gw.chat(&request(ChatTask::Review)).unwrap();
    let defaults = GatewayConfig::default();
    assert_eq!(rewrite.text, format!("reply from {}", defaults.chat_model));
    assert_eq!(review.text, format!("reply from {}", defaults.review_model));
    assert_eq!(review.usage.prompt_tokens, 11);
    assert_eq!(review.usage.completion_tokens, 3);
    let sent = &stub.requests.lock().unwrap()[0].1;
    assert_eq!(sent["temperature"], 0.0);
    assert_eq!(sent["seed"], 42);
}

#[test]
fn embedding_outage_fails_the_run_at_scoring() {
    // Empty vault: retrieval never embeds, so the first embed call is the ATS node.
    let stub = Stub::new(64, &[], 503);
    let gw = config(spawn(stub.clone()), 0).build().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let engine = Engine::open(dir.path(), gw, SkillLexicon::default()).unwrap();
    match engine.run(&common::inputs("jd_bi_analyst.txt"), &RunConfig::default()) {
        Err(EngineError::Pipeline(e)) => assert!(e.to_string().contains("score_and_render"), "{e}"),
        other => panic!("{:?}", other.map(|s| s.run_id)),
    }
    let runs = engine.list_runs().unwrap();
    assert_eq!(runs[0].status, RunStatus::Failed);
    let trace = engine.replay_trace(&runs[0].run_id).unwrap();
    assert_eq!(trace.len(), 11);
    assert!(stub.hits("chat/completions") > 0);
    assert_eq!(stub.hits("embeddings"), 1);
}
