mod common;

use std::sync::Arc;

use tailor_core::engine::{Engine, EngineError};
use tailor_core::gateway::MockMode;
use tailor_core::generation::{ProvenanceTag, RenderFormat};
use tailor_core::ingest::DocFormat;
use tailor_core::jd::SkillLexicon;
use tailor_core::pipeline::{Condition, NodeId, RunConfig, RunInputs};
use tailor_core::runstore::RunStatus;
use tailor_core::vault::Collection;

fn reopen(dir: &std::path::Path) -> Engine {
    Engine::open(
        dir,
        common::gateway(MockMode::IdentityRewrite),
        SkillLexicon::default(),
    )
    .unwrap()
}

#[test]
fn runs_survive_restart() {
    let (dir, engine) = common::fixture_engine(MockMode::IdentityRewrite);
    let st = engine
        .run(&common::inputs("jd_bi_analyst.txt"), &RunConfig::default())
        .unwrap();
    let chunks = engine.list_chunks(None).len();
    drop(engine);

    let engine = reopen(dir.path());
    assert_eq!(engine.list_chunks(None).len(), chunks);
    let runs = engine.list_runs().unwrap();
    assert_eq!(runs.len(), 1);
    assert_eq!(runs[0].run_id, st.run_id);
    assert_eq!(runs[0].status, RunStatus::Done);
    assert_eq!(runs[0].condition, Condition::Vault);
    assert_eq!(
        runs[0].overall_fit,
        Some(st.ats.as_ref().unwrap().overall_fit)
    );
    assert_eq!(engine.ats(&st.run_id).unwrap(), *st.ats.as_ref().unwrap());
    assert_eq!(engine.replay_trace(&st.run_id).unwrap(), st.trace);
    assert_eq!(
        engine.render(&st.run_id, RenderFormat::Html).unwrap(),
        st.rendered[&RenderFormat::Html]
    );
    let files: Vec<String> = std::fs::read_dir(dir.path().join("runs").join(&st.run_id))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    for f in [
        "result.json",
        "trace.jsonl",
        "resume.txt",
        "resume.html",
        "resume.md",
    ] {
        assert!(files.iter().any(|x| x == f), "missing {f}");
    }
}

#[test]
fn deleted_history_db_starts_empty_and_keeps_the_vault() {
    let (dir, engine) = common::fixture_engine(MockMode::IdentityRewrite);
    engine
        .run(&common::inputs("jd_bi_analyst.txt"), &RunConfig::default())
        .unwrap();
    drop(engine);
    for suffix in ["", "-wal", "-shm"] {
        let _ = std::fs::remove_file(dir.path().join(format!("runs.db{suffix}")));
    }
    let engine = reopen(dir.path());
    assert!(engine.list_runs().unwrap().is_empty());
    assert!(!engine.list_chunks(None).is_empty());
}

#[test]
fn corrupt_history_db_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("runs.db"),
        b"this is not a database, just some text bytes",
    )
    .unwrap();
    match Engine::open(
        dir.path(),
        common::gateway(MockMode::IdentityRewrite),
        SkillLexicon::default(),
    ) {
        Err(EngineError::Store(e)) => assert!(e.to_string().contains("move the file aside"), "{e}"),
        Err(e) => panic!("unexpected {e}"),
        Ok(_) => panic!("opened a corrupt store"),
    }
}

#[test]
fn vault_dimension_must_match_gateway() {
    let (dir, engine) = common::fixture_engine(MockMode::IdentityRewrite);
    drop(engine);
    let mut cfg = tailor_core::gateway::GatewayConfig::mock(MockMode::IdentityRewrite);
    cfg.embed_dim = Some(32);
    match Engine::open(dir.path(), cfg.build().unwrap(), SkillLexicon::default()) {
        Err(EngineError::DimensionMismatch {
            vault: 64,
            gateway: 32,
        }) => {}
        other => panic!("{:?}", other.err()),
    }
}

#[test]
fn failed_run_is_recorded() {
    let (_dir, engine) = common::fixture_engine(MockMode::IdentityRewrite);
    let inputs = RunInputs {
        resume_format: DocFormat::Csv,
        ..common::inputs("jd_bi_analyst.txt")
    };
    assert!(matches!(
        engine.run(&inputs, &RunConfig::default()),
        Err(EngineError::Pipeline(_))
    ));
    let runs = engine.list_runs().unwrap();
    assert_eq!(runs.len(), 1);
    assert_eq!(runs[0].status, RunStatus::Failed);
    assert!(runs[0].error.as_deref().unwrap().contains("ingest_resume"));
    let id = &runs[0].run_id;
    assert!(matches!(
        engine.run_result(id),
        Err(EngineError::RunNotDone(_))
    ));
    assert!(matches!(
        engine.approve(id, &["x".into()]),
        Err(EngineError::RunNotDone(_))
    ));
    assert!(engine.replay_trace(id).unwrap().is_empty());
}

#[test]
fn jd_without_elements_still_completes() {
    let (_dir, engine) = common::fixture_engine(MockMode::IdentityRewrite);
    let st = engine
        .run(
            &RunInputs::markdown("Join us!", common::resume()),
            &RunConfig::default(),
        )
        .unwrap();
    let trace = engine.replay_trace(&st.run_id).unwrap();
    assert_eq!(trace.first().unwrap().node_id, NodeId::IngestResume);
    assert_eq!(trace.len(), 12);
}

#[test]
fn invalid_inputs_create_no_run() {
    let (_dir, engine) = common::fixture_engine(MockMode::IdentityRewrite);
    let bad = RunConfig {
        alpha: -0.1,
        ..RunConfig::default()
    };
    match engine.run(&common::inputs("jd_bi_analyst.txt"), &bad) {
        Err(EngineError::InvalidInput { field, .. }) => assert_eq!(field, "config.alpha"),
        other => panic!("{:?}", other.err()),
    }
    let empty = RunInputs::markdown(" ", common::resume());
    assert!(matches!(
        engine.run(&empty, &RunConfig::default()),
        Err(EngineError::InvalidInput { .. })
    ));
    assert!(engine.list_runs().unwrap().is_empty());
    assert!(matches!(
        engine.run_record("nope"),
        Err(EngineError::UnknownRun(_))
    ));
    assert!(matches!(
        engine.replay_trace("nope"),
        Err(EngineError::UnknownRun(_))
    ));
}

#[test]
fn approve_rules() {
    let (_dir, engine) = common::fixture_engine(MockMode::IdentityRewrite);
    let st = engine
        .run(
            &common::inputs("jd_clinical_nurse.txt"),
            &RunConfig::default(),
        )
        .unwrap();
    let draft = st.draft.as_ref().unwrap();
    let target = draft
        .entries()
        .flat_map(|e| e.bullets())
        .find(|b| b.provenance.tag == ProvenanceTag::TargetResume)
        .unwrap();
    assert!(matches!(
        engine.approve(&st.run_id, std::slice::from_ref(&target.item_id)),
        Err(EngineError::NotApprovable { .. })
    ));
    assert!(matches!(
        engine.approve(&st.run_id, &["zzz".into()]),
        Err(EngineError::UnknownItem { .. })
    ));
    assert!(matches!(
        engine.approve(&st.run_id, &[]),
        Err(EngineError::InvalidInput { .. })
    ));
    assert!(matches!(
        engine.approve("nope", &["a".into()]),
        Err(EngineError::UnknownRun(_))
    ));

    let fallback = draft
        .tailored_highlights
        .iter()
        .find(|h| h.provenance.tag.is_fallback())
        .expect("distant JD leaves gaps for fallback");
    let before = engine.list_chunks(Some(Collection::GeneratedContent)).len();
    let approved = engine
        .approve(&st.run_id, std::slice::from_ref(&fallback.item_id))
        .unwrap();
    assert_eq!(
        approved[0].chunk_id,
        format!("gen/{}/{}", st.run_id, fallback.item_id)
    );
    let generated = engine.list_chunks(Some(Collection::GeneratedContent));
    assert_eq!(generated.len(), before + 1);
    let info = generated
        .iter()
        .find(|c| c.chunk.chunk_id == approved[0].chunk_id)
        .unwrap();
    assert_eq!(info.chunk.text, fallback.text);
    assert_eq!(info.chunk.doc_id, format!("gen-{}", st.run_id));

    // The approved chunk is now vault content: a later run may retrieve it.
    let again = engine
        .run(
            &common::inputs("jd_clinical_nurse.txt"),
            &RunConfig::default(),
        )
        .unwrap();
    assert!(again
        .retrieved
        .iter()
        .any(|h| h.chunk_id == approved[0].chunk_id));

    engine.delete_chunk(&approved[0].chunk_id).unwrap();
    assert!(engine.delete_chunk(&approved[0].chunk_id).is_err());
}

#[test]
fn concurrent_runs_and_writes() {
    let (_dir, engine) = common::fixture_engine(MockMode::IdentityRewrite);
    let engine = Arc::new(engine);
    let names = [
        "jd_bi_analyst.txt",
        "jd_data_quality.txt",
        "jd_demand_planner.txt",
        "jd_ml_analyst.txt",
    ];
    let handles: Vec<_> = names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let engine = Arc::clone(&engine);
            let name = name.to_string();
            std::thread::spawn(move || {
                let cfg = RunConfig {
                    retrieval_enabled: i % 2 == 0,
                    ..RunConfig::default()
                };
                let st = engine.run(&common::inputs(&name), &cfg).unwrap();
                if let Some(h) = st.draft.as_ref().unwrap().tailored_highlights.first() {
                    engine
                        .approve(&st.run_id, std::slice::from_ref(&h.item_id))
                        .unwrap();
                }
                st.run_id
            })
        })
        .collect();
    let ids: Vec<String> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    let runs = engine.list_runs().unwrap();
    assert_eq!(runs.len(), names.len());
    assert!(runs.iter().all(|r| r.status == RunStatus::Done));
    for id in &ids {
        assert!(runs.iter().any(|r| &r.run_id == id));
    }
    drop(engine);
}

#[test]
fn second_engine_on_same_vault_sees_lock() {
    let (dir, engine) = common::fixture_engine(MockMode::IdentityRewrite);
    let lock = tailor_core::vault::VaultLock::acquire(&dir.path().join("vault")).unwrap();
    let doc = common::vault_docs().remove(0);
    match engine.index_document(&doc) {
        Err(EngineError::Vault(tailor_core::vault::VaultError::Locked)) => {}
        other => panic!("{:?}", other.err()),
    }
    drop(lock);
    engine.index_document(&doc).unwrap();
}
