//! The career vault: three chunk collections with exact cosine kNN.

mod store;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::ingest::{fold, Chunk, ChunkLevel};

pub use store::{VaultLock, FORMAT_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum VaultError {
    #[error("embedding dimension {got} does not match vault dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("chunk {0} appears more than once in the batch")]
    DuplicateWithinBatch(String),
    #[error("{chunks} chunks but {embeddings} embeddings")]
    LengthMismatch { chunks: usize, embeddings: usize },
    #[error("embedding for {0} has zero or non-finite norm")]
    InvalidEmbedding(String),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("unknown run {0}")]
    UnknownRun(String),
    #[error("unknown chunk {0}")]
    UnknownChunk(String),
    #[error("corrupt store: {file} record {record}: {message}")]
    CorruptStore {
        file: String,
        record: usize,
        message: String,
    },
    #[error("store format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("vault directory is locked by another writer")]
    Locked,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Collection {
    ResumeHistory,
    CareerRecords,
    GeneratedContent,
}

impl Collection {
    pub const ALL: [Collection; 3] = [
        Collection::ResumeHistory,
        Collection::CareerRecords,
        Collection::GeneratedContent,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Collection::ResumeHistory => "resume_history",
            Collection::CareerRecords => "career_records",
            Collection::GeneratedContent => "generated_content",
        }
    }

    pub fn parse(name: &str) -> Option<Collection> {
        Collection::ALL.into_iter().find(|c| c.as_str() == name)
    }

    pub fn provenance(self) -> VaultProvenance {
        match self {
            Collection::ResumeHistory => VaultProvenance::VaultResume,
            Collection::CareerRecords => VaultProvenance::VaultCareerRecord,
            Collection::GeneratedContent => VaultProvenance::VaultGenerated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VaultProvenance {
    VaultResume,
    VaultCareerRecord,
    VaultGenerated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaultChunk {
    pub chunk: Chunk,
    pub embedding: Vec<f32>,
    pub provenance: VaultProvenance,
    pub created_at: DateTime<Utc>,
    pub approved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub chunk_id: String,
    pub collection: Collection,
    pub cosine: f64,
    pub rank: usize,
}

/// Run ids the vault accepts as sources of approved content.
pub trait RunRegistry {
    fn contains_run(&self, run_id: &str) -> bool;
}

impl RunRegistry for HashSet<String> {
    fn contains_run(&self, run_id: &str) -> bool {
        self.contains(run_id)
    }
}

fn normalize(v: &[f32]) -> Option<Vec<f32>> {
    let norm = v.iter().map(|x| *x as f64 * *x as f64).sum::<f64>().sqrt();
    if !norm.is_finite() || norm == 0.0 {
        return None;
    }
    Some(v.iter().map(|x| (*x as f64 / norm) as f32).collect())
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum()
}

#[derive(Debug)]
pub struct Vault {
    dimension: usize,
    collections: BTreeMap<Collection, BTreeMap<String, VaultChunk>>,
    reads: AtomicU64,
}

impl Clone for Vault {
    fn clone(&self) -> Self {
        Vault {
            dimension: self.dimension,
            collections: self.collections.clone(),
            reads: AtomicU64::new(0),
        }
    }
}

impl Vault {
    pub fn new(dimension: usize) -> Self {
        Vault {
            dimension,
            collections: Collection::ALL
                .into_iter()
                .map(|c| (c, BTreeMap::new()))
                .collect(),
            reads: AtomicU64::new(0),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.collections.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of read operations (queries and scans) served so far.
    pub fn read_count(&self) -> u64 {
        self.reads.load(Ordering::SeqCst)
    }

    fn touch(&self) {
        self.reads.fetch_add(1, Ordering::SeqCst);
    }

    /// Stores chunks with their embeddings, overwriting existing ids.
    pub fn index_chunks(
        &mut self,
        collection: Collection,
        chunks: Vec<Chunk>,
        embeddings: Vec<Vec<f32>>,
    ) -> Result<usize, VaultError> {
        self.index_with(collection, chunks, embeddings, false)
    }

    fn index_with(
        &mut self,
        collection: Collection,
        chunks: Vec<Chunk>,
        embeddings: Vec<Vec<f32>>,
        approved: bool,
    ) -> Result<usize, VaultError> {
        if chunks.len() != embeddings.len() {
            return Err(VaultError::LengthMismatch {
                chunks: chunks.len(),
                embeddings: embeddings.len(),
            });
        }
        let mut seen = HashSet::new();
        let mut prepared = Vec::with_capacity(chunks.len());
        for (chunk, emb) in chunks.into_iter().zip(embeddings) {
            if emb.len() != self.dimension {
                return Err(VaultError::DimensionMismatch {
                    expected: self.dimension,
                    got: emb.len(),
                });
            }
            if !seen.insert(chunk.chunk_id.clone()) {
                return Err(VaultError::DuplicateWithinBatch(chunk.chunk_id));
            }
            let embedding = normalize(&emb)
                .ok_or_else(|| VaultError::InvalidEmbedding(chunk.chunk_id.clone()))?;
            prepared.push((chunk, embedding));
        }
        let now = Utc::now();
        let store = self.collections.entry(collection).or_default();
        let count = prepared.len();
        for (chunk, embedding) in prepared {
            store.insert(
                chunk.chunk_id.clone(),
                VaultChunk {
                    chunk,
                    embedding,
                    provenance: collection.provenance(),
                    created_at: now,
                    approved,
                },
            );
        }
        Ok(count)
    }

    /// Exact top-k by cosine over the named collections, ties by chunk id.
    pub fn query(
        &self,
        vector: &[f32],
        collections: &[Collection],
        k: usize,
    ) -> Result<Vec<QueryResult>, VaultError> {
        self.query_where(vector, collections, k, |_| true)
    }

    /// As [`Vault::query`], restricted to chunks at the given levels.
    pub fn query_levels(
        &self,
        vector: &[f32],
        collections: &[Collection],
        levels: &[ChunkLevel],
        k: usize,
    ) -> Result<Vec<QueryResult>, VaultError> {
        self.query_where(vector, collections, k, |c| levels.contains(&c.chunk.level))
    }

    fn query_where(
        &self,
        vector: &[f32],
        collections: &[Collection],
        k: usize,
        keep: impl Fn(&VaultChunk) -> bool,
    ) -> Result<Vec<QueryResult>, VaultError> {
        if k == 0 {
            return Err(VaultError::InvalidK);
        }
        if vector.len() != self.dimension {
            return Err(VaultError::DimensionMismatch {
                expected: self.dimension,
                got: vector.len(),
            });
        }
        self.touch();
        let query = match normalize(vector) {
            Some(q) => q,
            None => return Ok(Vec::new()),
        };
        let wanted: BTreeSet<Collection> = collections.iter().copied().collect();
        let mut hits: Vec<(f64, &str, Collection)> = self
            .collections
            .iter()
            .filter(|(c, _)| wanted.contains(c))
            .flat_map(|(c, store)| store.values().map(move |vc| (c, vc)))
            .filter(|(_, vc)| keep(vc))
            .map(|(c, vc)| (dot(&query, &vc.embedding), vc.chunk.chunk_id.as_str(), *c))
            .collect();
        hits.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        Ok(hits
            .into_iter()
            .take(k)
            .enumerate()
            .map(|(i, (cosine, id, collection))| QueryResult {
                chunk_id: id.to_string(),
                collection,
                cosine,
                rank: i + 1,
            })
            .collect())
    }

    pub fn get(&self, chunk_id: &str) -> Option<(Collection, &VaultChunk)> {
        self.collections
            .iter()
            .find_map(|(c, store)| store.get(chunk_id).map(|vc| (*c, vc)))
    }

    pub fn chunks(&self, collection: Collection) -> impl Iterator<Item = &VaultChunk> {
        self.collections
            .get(&collection)
            .into_iter()
            .flat_map(|s| s.values())
    }

    /// Every stored chunk with its collection; counts as one read.
    pub fn scan(&self) -> impl Iterator<Item = (Collection, &VaultChunk)> {
        self.touch();
        self.collections
            .iter()
            .flat_map(|(c, s)| s.values().map(move |vc| (*c, vc)))
    }

    /// Distinct employer names across all collections.
    pub fn employers(&self) -> Vec<String> {
        self.touch();
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for store in self.collections.values() {
            for vc in store.values() {
                if let Some(e) = &vc.chunk.employer {
                    if seen.insert(fold(e)) {
                        out.push(e.clone());
                    }
                }
            }
        }
        out
    }

    /// Texts of every chunk attributed to `employer` (folded comparison).
    pub fn employer_texts(&self, employer: &str) -> Vec<String> {
        self.touch();
        let key = fold(employer);
        self.collections
            .values()
            .flat_map(|s| s.values())
            .filter(|vc| vc.chunk.employer.as_deref().map(fold).as_deref() == Some(key.as_str()))
            .map(|vc| vc.chunk.text.clone())
            .collect()
    }

    pub fn delete(&mut self, chunk_id: &str) -> Result<VaultChunk, VaultError> {
        for store in self.collections.values_mut() {
            if let Some(vc) = store.remove(chunk_id) {
                return Ok(vc);
            }
        }
        Err(VaultError::UnknownChunk(chunk_id.to_string()))
    }

    /// Stores vetted generated content in `generated_content`, tagged with its run.
    pub fn approve_generated(
        &mut self,
        mut chunk: Chunk,
        embedding: Vec<f32>,
        source_run_id: &str,
        runs: &dyn RunRegistry,
    ) -> Result<String, VaultError> {
        if !runs.contains_run(source_run_id) {
            return Err(VaultError::UnknownRun(source_run_id.to_string()));
        }
        chunk
            .metadata
            .insert("source_run_id".into(), source_run_id.to_string());
        let id = chunk.chunk_id.clone();
        self.index_with(
            Collection::GeneratedContent,
            vec![chunk],
            vec![embedding],
            true,
        )?;
        Ok(id)
    }
}
