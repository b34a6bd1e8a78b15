#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use tailor_core::ats::Group;
use tailor_core::engine::Engine;
use tailor_core::gateway::{Gateway, GatewayConfig, MockMode};
use tailor_core::ingest::SourceDocument;
use tailor_core::jd::SkillLexicon;
use tailor_core::pipeline::RunInputs;
use tailor_core::vault::Vault;

pub const VAULT_FILES: [&str; 3] = [
    "vault/resume_2022.md",
    "vault/resume_2020.md",
    "vault/career_history.csv",
];

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn read(rel: &str) -> String {
    std::fs::read_to_string(fixtures().join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn resume() -> String {
    read("fixture_resume_a.md")
}

pub fn jd(name: &str) -> String {
    read(&format!("jds/{name}"))
}

pub fn inputs(jd_name: &str) -> RunInputs {
    RunInputs::markdown(jd(jd_name), resume())
}

/// JD file names with their group, in file-name order.
pub fn jd_groups() -> Vec<(String, Group)> {
    let groups: std::collections::BTreeMap<String, Group> =
        serde_json::from_str(&read("groups.json")).unwrap();
    groups.into_iter().collect()
}

pub fn gateway(mode: MockMode) -> Arc<dyn Gateway> {
    GatewayConfig::mock(mode).build().unwrap()
}

pub fn vault_docs() -> Vec<SourceDocument> {
    VAULT_FILES
        .iter()
        .map(|f| SourceDocument::from_path(&fixtures().join(f), false).unwrap())
        .collect()
}

/// In-memory vault holding the fixture documents.
pub fn fixture_vault(gw: &dyn Gateway) -> Vault {
    let mut vault = Vault::new(gw.embed_dim());
    for doc in vault_docs() {
        let chunks = doc.to_chunks().unwrap();
        let texts: Vec<String> = chunks.iter().map(|c| c.text.clone()).collect();
        let emb = gw.embed(&texts).unwrap();
        let collection = tailor_core::engine::collection_for(doc.kind).unwrap();
        vault.index_chunks(collection, chunks, emb).unwrap();
    }
    vault
}

/// Engine in a fresh data dir with the fixture documents indexed.
pub fn fixture_engine(mode: MockMode) -> (tempfile::TempDir, Engine) {
    let dir = tempfile::tempdir().unwrap();
    let engine = Engine::open(dir.path(), gateway(mode), SkillLexicon::default()).unwrap();
    for doc in vault_docs() {
        engine.index_document(&doc).unwrap();
    }
    (dir, engine)
}
