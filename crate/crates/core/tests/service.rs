mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use tailor_core::gateway::MockMode;
use tailor_core::pipeline::RunConfig;
use tailor_core::service::{router, AppState};

struct Api {
    app: axum::Router,
    _dir: tempfile::TempDir,
}

impl Api {
    fn new() -> Self {
        let (dir, engine) = common::fixture_engine(MockMode::IdentityRewrite);
        let app = router(AppState {
            engine: Arc::new(engine),
            defaults: RunConfig::default(),
        });
        Api { app, _dir: dir }
    }

    async fn call(
        &self,
        method: &str,
        uri: &str,
        body: Option<Value>,
    ) -> (StatusCode, Value, String) {
        let mut req = Request::builder().method(method).uri(uri);
        let body = match body {
            Some(v) => {
                req = req.header("content-type", "application/json");
                Body::from(v.to_string())
            }
            None => Body::empty(),
        };
        let resp = self
            .app
            .clone()
            .oneshot(req.body(body).unwrap())
            .await
            .unwrap();
        let status = resp.status();
        let ctype = resp
            .headers()
            .get("content-type")
            .map(|v| v.to_str().unwrap().to_string())
            .unwrap_or_default();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let json = serde_json::from_slice(&bytes)
            .unwrap_or(Value::String(String::from_utf8_lossy(&bytes).into()));
        (status, json, ctype)
    }

    async fn run(&self, jd: &str, config: Value) -> Value {
        let (status, body, _) = self
            .call(
                "POST",
                "/runs",
                Some(json!({
                    "jd_text": common::jd(jd),
                    "base_resume": {"text": common::resume()},
                    "config": config,
                })),
            )
            .await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        body
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn run_lifecycle() {
    let api = Api::new();
    let (s, body, _) = api.call("GET", "/health", None).await;
    assert_eq!((s, body["status"].as_str()), (StatusCode::OK, Some("ok")));

    let summary = api.run("jd_clinical_nurse.txt", json!({"seed": 42})).await;
    let id = summary["run_id"].as_str().unwrap().to_string();
    assert_eq!(summary["condition"], "vault");
    assert_eq!(summary["profile_scores"].as_array().unwrap().len(), 5);

    let (s, runs, _) = api.call("GET", "/runs", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(runs[0]["run_id"], id.as_str());
    assert_eq!(runs[0]["status"], "done");

    let (s, detail, _) = api.call("GET", &format!("/runs/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(detail["record"]["run_id"], id.as_str());
    assert!(detail["result"]["draft"]["tailored_highlights"].is_array());

    let (s, trace, _) = api.call("GET", &format!("/runs/{id}/trace"), None).await;
    assert_eq!(s, StatusCode::OK);
    let nodes: Vec<&str> = trace
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["node_id"].as_str().unwrap())
        .collect();
    assert_eq!(nodes.len(), 12);
    assert_eq!(nodes[0], "ingest_resume");
    assert_eq!(nodes[11], "score_and_render");

    let (s, ats, _) = api.call("GET", &format!("/runs/{id}/ats"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(ats["overall_fit"], summary["overall_fit"]);

    let (s, html, ctype) = api
        .call("GET", &format!("/runs/{id}/render?format=html"), None)
        .await;
    assert_eq!(s, StatusCode::OK);
    assert!(ctype.starts_with("text/html"));
    assert!(html.as_str().unwrap().contains("<h1>Jordan Avery</h1>"));
    let (s, err, _) = api
        .call("GET", &format!("/runs/{id}/render?format=pdf"), None)
        .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(err["field"], "format");
}

#[tokio::test(flavor = "multi_thread")]
async fn approve_then_reuse() {
    let api = Api::new();
    let summary = api.run("jd_clinical_nurse.txt", json!({})).await;
    let id = summary["run_id"].as_str().unwrap();
    let (_, detail, _) = api.call("GET", &format!("/runs/{id}"), None).await;
    let item = detail["result"]["draft"]["tailored_highlights"][0]["item_id"]
        .as_str()
        .unwrap()
        .to_string();

    let (s, approved, _) = api
        .call(
            "POST",
            &format!("/runs/{id}/approve"),
            Some(json!({"item_ids": [item]})),
        )
        .await;
    assert_eq!(s, StatusCode::CREATED, "{approved}");
    let chunk_id = approved[0]["chunk_id"].as_str().unwrap().to_string();

    let (_, chunks, _) = api
        .call("GET", "/vault/chunks?collection=generated_content", None)
        .await;
    assert!(chunks
        .as_array()
        .unwrap()
        .iter()
        .any(|c| c["chunk_id"] == chunk_id.as_str()));

    let again = api.run("jd_clinical_nurse.txt", json!({})).await;
    let (_, detail, _) = api
        .call(
            "GET",
            &format!("/runs/{}", again["run_id"].as_str().unwrap()),
            None,
        )
        .await;
    let retrieved = detail["result"]["retrieved"].as_array().unwrap();
    assert!(retrieved.iter().any(|h| h["chunk_id"] == chunk_id.as_str()));

    let (s, _, _) = api
        .call("DELETE", &format!("/vault/chunks/{chunk_id}"), None)
        .await;
    assert_eq!(s, StatusCode::NO_CONTENT);
    let (s, err, _) = api
        .call("DELETE", &format!("/vault/chunks/{chunk_id}"), None)
        .await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "UNKNOWN_CHUNK");
}

#[tokio::test(flavor = "multi_thread")]
async fn error_codes() {
    let api = Api::new();
    let (s, err, _) = api.call("GET", "/runs/nope", None).await;
    assert_eq!(
        (s, err["code"].as_str()),
        (StatusCode::NOT_FOUND, Some("UNKNOWN_RUN"))
    );

    let (s, err, _) = api
        .call(
            "POST",
            "/runs",
            Some(json!({"jd_text": "x", "base_resume": {"text": "# A"}, "config": {"alpha": "high"}})),
        )
        .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "VALIDATION");
    assert_eq!(err["field"], "config.alpha");

    let (s, err, _) = api
        .call(
            "POST",
            "/runs",
            Some(json!({"jd_text": "x", "base_resume": {"text": "# A"}, "config": {"tau": 3.0}})),
        )
        .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(err["field"], "config.tau");

    let (s, err, _) = api
        .call(
            "POST",
            "/runs",
            Some(json!({"base_resume": {"text": "# A"}})),
        )
        .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(
        err["message"].as_str().unwrap().contains("jd_text"),
        "{err}"
    );

    let (s, err, _) = api
        .call(
            "POST",
            "/runs",
            Some(json!({"jd_text": "x", "base_resume": {"path": "../etc/passwd"}})),
        )
        .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(err["field"], "base_resume.path");

    let summary = api.run("jd_bi_analyst.txt", json!({})).await;
    let id = summary["run_id"].as_str().unwrap();
    let (s, err, _) = api
        .call(
            "POST",
            &format!("/runs/{id}/approve"),
            Some(json!({"item_ids": ["nope"]})),
        )
        .await;
    assert_eq!(
        (s, err["code"].as_str()),
        (StatusCode::NOT_FOUND, Some("UNKNOWN_ITEM"))
    );
    let (_, detail, _) = api.call("GET", &format!("/runs/{id}"), None).await;
    let base_item = detail["result"]["draft"]["sections"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|s| s["body"]["type"] == "entries")
        .filter_map(|s| s["body"]["items"].as_array())
        .flatten()
        .flat_map(|e| e["bullets"].as_array().unwrap())
        .find(|b| b["provenance"]["tag"] == "target_resume")
        .map(|b| b["item_id"].as_str().unwrap().to_string())
        .unwrap();
    let (s, err, _) = api
        .call(
            "POST",
            &format!("/runs/{id}/approve"),
            Some(json!({"item_ids": [base_item]})),
        )
        .await;
    assert_eq!(
        (s, err["code"].as_str()),
        (StatusCode::BAD_REQUEST, Some("NOT_APPROVABLE"))
    );

    let (s, err, _) = api
        .call(
            "POST",
            "/vault/documents",
            Some(json!({"doc_id": "a", "kind": "career_record", "format": "markdown", "raw": "x"})),
        )
        .await;
    assert_eq!(s, StatusCode::BAD_REQUEST, "{err}");

    let (s, err, _) = api
        .call("GET", "/vault/chunks?collection=bogus", None)
        .await;
    assert_eq!(
        (s, err["field"].as_str()),
        (StatusCode::BAD_REQUEST, Some("collection"))
    );

    let (s, err, _) = api.call("GET", "/nowhere", None).await;
    assert_eq!(
        (s, err["code"].as_str()),
        (StatusCode::NOT_FOUND, Some("NOT_FOUND"))
    );
}

#[tokio::test(flavor = "multi_thread")]
async fn failed_run_reports_not_done() {
    let api = Api::new();
    let (s, err, _) = api
        .call(
            "POST",
            "/runs",
            Some(json!({"jd_text": common::jd("jd_bi_analyst.txt"), "base_resume": {"text": "a,b\n1,2", "format": "csv"}})),
        )
        .await;
    assert_eq!(
        (s, err["code"].as_str()),
        (StatusCode::INTERNAL_SERVER_ERROR, Some("PIPELINE_FAILURE"))
    );
    let (_, runs, _) = api.call("GET", "/runs", None).await;
    let id = runs[0]["run_id"].as_str().unwrap();
    assert_eq!(runs[0]["status"], "failed");
    let (s, detail, _) = api.call("GET", &format!("/runs/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(detail["result"].is_null());
    let (s, err, _) = api.call("GET", &format!("/runs/{id}/ats"), None).await;
    assert_eq!(
        (s, err["code"].as_str()),
        (StatusCode::CONFLICT, Some("RUN_NOT_DONE"))
    );
}

#[tokio::test(flavor = "multi_thread")]
async fn index_and_compare() {
    let (dir, engine) = {
        let dir = tempfile::tempdir().unwrap();
        let engine = tailor_core::engine::Engine::open(
            dir.path(),
            common::gateway(MockMode::IdentityRewrite),
            tailor_core::jd::SkillLexicon::default(),
        )
        .unwrap();
        (dir, engine)
    };
    std::fs::write(dir.path().join("resume.md"), common::resume()).unwrap();
    let api = Api {
        app: router(AppState {
            engine: Arc::new(engine),
            defaults: RunConfig::default(),
        }),
        _dir: dir,
    };
    let (s, report, _) = api
        .call(
            "POST",
            "/vault/documents",
            Some(json!({"doc_id": "resume_2022", "kind": "resume_history", "format": "markdown", "raw": common::read("vault/resume_2022.md")})),
        )
        .await;
    assert_eq!(s, StatusCode::CREATED, "{report}");
    assert_eq!(report["collection"], "resume_history");
    assert!(report["chunks"].as_u64().unwrap() > 0);

    let (s, out, _) = api
        .call(
            "POST",
            "/experiments/compare",
            Some(json!({
                "jds": [
                    {"name": "bi", "jd_text": common::jd("jd_bi_analyst.txt"), "group": "aligned"},
                    {"name": "nurse", "jd_text": common::jd("jd_clinical_nurse.txt"), "group": "distant"}
                ],
                "base_resume": {"path": "resume.md"}
            })),
        )
        .await;
    assert_eq!(s, StatusCode::OK, "{out}");
    assert_eq!(out["rows"].as_array().unwrap().len(), 2);
    assert!(out["table"].as_str().unwrap().contains("nurse"));
    let (_, runs, _) = api.call("GET", "/runs", None).await;
    assert_eq!(runs.as_array().unwrap().len(), 4);
}
