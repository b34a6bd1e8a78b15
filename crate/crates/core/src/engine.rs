//! Long-lived state shared by the CLI, the HTTP service and the FFI layer:
//! the persisted vault, the gateway, the lexicon and the run history.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::Utc;
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::ats::AtsReport;
use crate::gateway::{Gateway, GatewayError};
use crate::generation::{render, ProvenanceTag, RenderFormat};
use crate::ingest::{Chunk, ChunkLevel, DocKind, IngestError, SectionKind, SourceDocument};
use crate::jd::SkillLexicon;
use crate::pipeline::{Pipeline, PipelineError, RunConfig, RunInputs, RunResult, TraceEvent};
use crate::runstore::{RunRecord, RunStatus, RunStore, StoreError};
use crate::vault::{Collection, Vault, VaultError, VaultLock};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("invalid input: {field}: {message}")]
    InvalidInput { field: String, message: String },
    #[error("unknown run {0}")]
    UnknownRun(String),
    #[error("run {run_id} has no item {item_id}")]
    UnknownItem { run_id: String, item_id: String },
    #[error("item {item_id} of run {run_id} is base resume content, not generated")]
    NotApprovable { run_id: String, item_id: String },
    #[error("run {0} did not complete")]
    RunNotDone(String),
    #[error("vault dimension {vault} does not match gateway dimension {gateway}")]
    DimensionMismatch { vault: usize, gateway: usize },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Vault(#[from] VaultError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EngineError + '_ {
    move |source| EngineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn invalid(field: &str, message: impl Into<String>) -> EngineError {
    EngineError::InvalidInput {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub doc_id: String,
    pub collection: Collection,
    pub chunks: usize,
}

/// Chunk metadata without the embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkInfo {
    pub collection: Collection,
    #[serde(flatten)]
    pub chunk: Chunk,
    pub approved: bool,
    pub created_at: chrono::DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApprovedItem {
    pub item_id: String,
    pub chunk_id: String,
}

pub fn collection_for(kind: DocKind) -> Option<Collection> {
    match kind {
        DocKind::ResumeHistory => Some(Collection::ResumeHistory),
        DocKind::CareerRecord => Some(Collection::CareerRecords),
        DocKind::Generated => Some(Collection::GeneratedContent),
        DocKind::TargetResume => None,
    }
}

pub struct Engine {
    data_dir: PathBuf,
    vault: RwLock<Vault>,
    gateway: Arc<dyn Gateway>,
    lexicon: SkillLexicon,
    store: RunStore,
}

impl Engine {
    /// Opens `data_dir`, loading the vault if one was persisted there.
    pub fn open(
        data_dir: &Path,
        gateway: Arc<dyn Gateway>,
        lexicon: SkillLexicon,
    ) -> Result<Engine, EngineError> {
        fs::create_dir_all(data_dir.join("runs")).map_err(io_err(data_dir))?;
        let vault_dir = data_dir.join("vault");
        let vault = if Vault::exists_at(&vault_dir) {
            Vault::load(&vault_dir)?
        } else {
            Vault::new(gateway.embed_dim())
        };
        if vault.dimension() != gateway.embed_dim() {
            return Err(EngineError::DimensionMismatch {
                vault: vault.dimension(),
                gateway: gateway.embed_dim(),
            });
        }
        let store = RunStore::open(&data_dir.join("runs.db"))?;
        Ok(Engine {
            data_dir: data_dir.to_path_buf(),
            vault: RwLock::new(vault),
            gateway,
            lexicon,
            store,
        })
    }

    pub fn data_dir(&self) -> &Path {
        &self.data_dir
    }

    pub fn gateway(&self) -> &dyn Gateway {
        self.gateway.as_ref()
    }

    pub fn lexicon(&self) -> &SkillLexicon {
        &self.lexicon
    }

    pub fn store(&self) -> &RunStore {
        &self.store
    }

    fn vault_dir(&self) -> PathBuf {
        self.data_dir.join("vault")
    }

    fn run_dir(&self, run_id: &str) -> PathBuf {
        self.data_dir.join("runs").join(run_id)
    }

    /// Read access for callers that need several operations on one snapshot.
    pub fn with_vault<T>(&self, f: impl FnOnce(&Vault) -> T) -> T {
        f(&self.vault.read())
    }

    pub fn vault_read_count(&self) -> u64 {
        self.vault.read().read_count()
    }

    /// Applies `f` under the in-process write guard and the on-disk writer lock,
    /// then persists. On a failed write the vault is reloaded from disk.
    fn write_vault<T>(
        &self,
        f: impl FnOnce(&mut Vault) -> Result<T, EngineError>,
    ) -> Result<T, EngineError> {
        let mut guard = self.vault.write();
        let dir = self.vault_dir();
        let _lock = VaultLock::acquire(&dir)?;
        let out = f(&mut guard);
        let persisted = match out {
            Ok(v) => guard.persist(&dir).map(|_| v).map_err(EngineError::from),
            Err(e) => Err(e),
        };
        if persisted.is_err() {
            *guard = if Vault::exists_at(&dir) {
                Vault::load(&dir)?
            } else {
                Vault::new(guard.dimension())
            };
        }
        persisted
    }

    pub fn index_document(&self, doc: &SourceDocument) -> Result<IndexReport, EngineError> {
        let collection = collection_for(doc.kind)
            .ok_or_else(|| invalid("kind", "target resumes are not indexed"))?;
        let chunks = doc.to_chunks()?;
        let texts: Vec<String> = chunks.iter().map(|c| c.text.clone()).collect();
        let embeddings = self.gateway.embed(&texts)?;
        let count = self.write_vault(|v| Ok(v.index_chunks(collection, chunks, embeddings)?))?;
        log::info!(
            "indexed {} chunks from {} into {}",
            count,
            doc.doc_id,
            collection.as_str()
        );
        Ok(IndexReport {
            doc_id: doc.doc_id.clone(),
            collection,
            chunks: count,
        })
    }

    pub fn list_chunks(&self, collection: Option<Collection>) -> Vec<ChunkInfo> {
        let v = self.vault.read();
        let wanted: Vec<Collection> = collection.map_or(Collection::ALL.to_vec(), |c| vec![c]);
        wanted
            .into_iter()
            .flat_map(|c| {
                v.chunks(c)
                    .map(move |vc| ChunkInfo {
                        collection: c,
                        chunk: vc.chunk.clone(),
                        approved: vc.approved,
                        created_at: vc.created_at,
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    pub fn delete_chunk(&self, chunk_id: &str) -> Result<(), EngineError> {
        self.write_vault(|v| v.delete(chunk_id).map(|_| ()).map_err(EngineError::from))
    }

    /// Runs the pipeline against the current vault and persists the outcome.
    pub fn run(&self, inputs: &RunInputs, config: &RunConfig) -> Result<RunResult, EngineError> {
        let vault = self.vault.read();
        self.run_on(&vault, inputs, config)
    }

    /// As [`Engine::run`] against a vault snapshot the caller already holds.
    pub fn run_on(
        &self,
        vault: &Vault,
        inputs: &RunInputs,
        config: &RunConfig,
    ) -> Result<RunResult, EngineError> {
        if inputs.jd_text.trim().is_empty() {
            return Err(invalid("jd_text", "is empty"));
        }
        if inputs.resume_text.trim().is_empty() {
            return Err(invalid("base_resume", "is empty"));
        }
        config
            .validate()
            .map_err(|(field, message)| invalid(&format!("config.{field}"), message))?;
        let run_id = uuid::Uuid::new_v4().to_string();
        let dir = self.run_dir(&run_id);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let trace_path = dir.join("trace.jsonl");
        let record = RunRecord {
            run_id: run_id.clone(),
            created_at: Utc::now(),
            jd_hash: crate::jd::extract_elements(&inputs.jd_text, &self.lexicon)
                .map(|a| a.raw_hash)
                .unwrap_or_default(),
            condition: config.condition(),
            overall_fit: None,
            best_profile: None,
            verdict: None,
            status: RunStatus::Running,
            trace_path: format!("runs/{run_id}/trace.jsonl"),
            error: None,
        };
        self.store.insert(&record)?;

        let mut trace = File::create(&trace_path).map_err(io_err(&trace_path))?;
        let mut write_err = None;
        let pipeline = Pipeline::new(vault, self.gateway.as_ref(), &self.lexicon);
        let result = pipeline.run_observed(&run_id, inputs, config, &mut |ev| {
            let line = serde_json::to_string(ev).expect("trace events serialize");
            if let Err(e) = writeln!(trace, "{line}").and_then(|_| trace.flush()) {
                write_err.get_or_insert(e);
            }
        });
        if let Some(e) = write_err {
            self.store.fail(&run_id, &e.to_string())?;
            return Err(io_err(&trace_path)(e));
        }
        let state = match result {
            Ok(s) => s,
            Err(e) => {
                self.store.fail(&run_id, &e.to_string())?;
                return Err(e.into());
            }
        };
        let result_path = dir.join("result.json");
        let json = serde_json::to_string_pretty(&state).expect("run state serializes");
        fs::write(&result_path, json + "\n").map_err(io_err(&result_path))?;
        for (format, text) in &state.rendered {
            let p = dir.join(format!("resume.{}", format.extension()));
            fs::write(&p, text).map_err(io_err(&p))?;
        }
        let ats = state.ats.as_ref().expect("score_and_render sets ats");
        self.store
            .finish(&run_id, ats.overall_fit, ats.best_profile, ats.verdict)?;
        log::info!("run {run_id} done: overall {:.1}", ats.overall_fit);
        Ok(state)
    }

    pub fn list_runs(&self) -> Result<Vec<RunRecord>, EngineError> {
        Ok(self.store.list()?)
    }

    pub fn run_record(&self, run_id: &str) -> Result<RunRecord, EngineError> {
        self.store
            .get(run_id)?
            .ok_or_else(|| EngineError::UnknownRun(run_id.to_string()))
    }

    pub fn run_result(&self, run_id: &str) -> Result<RunResult, EngineError> {
        let record = self.run_record(run_id)?;
        if record.status != RunStatus::Done {
            return Err(EngineError::RunNotDone(run_id.to_string()));
        }
        let path = self.run_dir(run_id).join("result.json");
        let raw = fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&raw).map_err(|source| EngineError::Json { path, source })
    }

    /// Trace events exactly as recorded, including those of failed runs.
    pub fn replay_trace(&self, run_id: &str) -> Result<Vec<TraceEvent>, EngineError> {
        let path = self.run_dir(run_id).join("trace.jsonl");
        if self.store.get(run_id)?.is_none() && !path.exists() {
            return Err(EngineError::UnknownRun(run_id.to_string()));
        }
        let file = File::open(&path).map_err(io_err(&path))?;
        let mut out = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(io_err(&path))?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(
                serde_json::from_str(&line).map_err(|source| EngineError::Json {
                    path: path.clone(),
                    source,
                })?,
            );
        }
        Ok(out)
    }

    pub fn ats(&self, run_id: &str) -> Result<AtsReport, EngineError> {
        let state = self.run_result(run_id)?;
        state
            .ats
            .ok_or_else(|| EngineError::RunNotDone(run_id.to_string()))
    }

    pub fn render(&self, run_id: &str, format: RenderFormat) -> Result<String, EngineError> {
        let state = self.run_result(run_id)?;
        if let Some(text) = state.rendered.get(&format) {
            return Ok(text.clone());
        }
        let draft = state
            .draft
            .ok_or_else(|| EngineError::RunNotDone(run_id.to_string()))?;
        Ok(render(&draft, format))
    }

    /// Stores the named generated items of a finished run in `generated_content`
    /// as `gen/{run_id}/{item_id}`.
    pub fn approve(
        &self,
        run_id: &str,
        item_ids: &[String],
    ) -> Result<Vec<ApprovedItem>, EngineError> {
        if item_ids.is_empty() {
            return Err(invalid("item_ids", "at least one item id is required"));
        }
        let state = self.run_result(run_id)?;
        let draft = state
            .draft
            .as_ref()
            .ok_or_else(|| EngineError::RunNotDone(run_id.to_string()))?;
        let mut chunks = Vec::with_capacity(item_ids.len());
        for item_id in item_ids {
            let bullet = draft
                .entries()
                .flat_map(|e| e.bullets().iter().map(move |b| (e, b)))
                .find(|(_, b)| &b.item_id == item_id);
            let (text, employer, tag) = match bullet {
                Some((_, b)) if b.provenance.tag == ProvenanceTag::TargetResume => {
                    return Err(EngineError::NotApprovable {
                        run_id: run_id.into(),
                        item_id: item_id.clone(),
                    })
                }
                Some((e, b)) => (b.text.clone(), Some(e.employer.clone()), b.provenance.tag),
                None => match draft
                    .tailored_highlights
                    .iter()
                    .find(|h| &h.item_id == item_id)
                {
                    Some(h) => (h.text.clone(), h.employer.clone(), h.provenance.tag),
                    None => {
                        return Err(EngineError::UnknownItem {
                            run_id: run_id.into(),
                            item_id: item_id.clone(),
                        })
                    }
                },
            };
            let metadata = BTreeMap::from([
                ("item_id".to_string(), item_id.clone()),
                ("origin".to_string(), tag.as_str().to_string()),
            ]);
            chunks.push(Chunk {
                chunk_id: format!("gen/{run_id}/{item_id}"),
                doc_id: format!("gen-{run_id}"),
                section_kind: SectionKind::Experience,
                level: ChunkLevel::Bullet,
                parent_id: None,
                text,
                employer,
                metadata,
            });
        }
        let texts: Vec<String> = chunks.iter().map(|c| c.text.clone()).collect();
        let embeddings = self.gateway.embed(&texts)?;
        self.write_vault(|v| {
            let mut out = Vec::with_capacity(chunks.len());
            for (chunk, emb) in chunks.into_iter().zip(embeddings) {
                let item_id = chunk.metadata["item_id"].clone();
                let chunk_id = v.approve_generated(chunk, emb, run_id, &self.store)?;
                out.push(ApprovedItem { item_id, chunk_id });
            }
            Ok(out)
        })
    }
}
