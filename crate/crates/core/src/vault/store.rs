//! On-disk vault format: `manifest.json` plus one JSON-lines file per collection.

use std::collections::BTreeMap;
use std::fs::{self, File, TryLockError};
use std::io::Write;
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{Collection, Vault, VaultChunk, VaultError, VaultProvenance};
use crate::ingest::Chunk;

pub const FORMAT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";
const LOCK_FILE: &str = ".lock";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    dimension: usize,
    collections: Vec<String>,
    /// Record count per collection file; detects truncation at a line boundary.
    records: BTreeMap<String, usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    #[serde(flatten)]
    chunk: Chunk,
    provenance: VaultProvenance,
    created_at: DateTime<Utc>,
    approved: bool,
    /// Little-endian f32 values, base64 encoded.
    embedding: String,
}

fn encode_embedding(v: &[f32]) -> String {
    let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

fn decode_embedding(s: &str) -> Result<Vec<f32>, String> {
    let bytes = STANDARD.decode(s).map_err(|e| e.to_string())?;
    if bytes.len() % 4 != 0 {
        return Err(format!(
            "embedding byte length {} is not a multiple of 4",
            bytes.len()
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect())
}

fn file_name(c: Collection) -> String {
    format!("{}.jsonl", c.as_str())
}

/// Writes `bytes` next to `path` and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), VaultError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Exclusive writer lock on a vault directory, released on drop.
#[derive(Debug)]
pub struct VaultLock {
    _file: File,
    path: PathBuf,
}

impl VaultLock {
    pub fn acquire(dir: &Path) -> Result<VaultLock, VaultError> {
        fs::create_dir_all(dir)?;
        let path = dir.join(LOCK_FILE);
        let file = File::options()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)?;
        match file.try_lock() {
            Ok(()) => Ok(VaultLock { _file: file, path }),
            Err(TryLockError::WouldBlock) => Err(VaultError::Locked),
            Err(TryLockError::Error(e)) => Err(e.into()),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl Vault {
    pub fn exists_at(dir: &Path) -> bool {
        dir.join(MANIFEST).is_file()
    }

    /// Writes the vault to `dir`. Output bytes depend only on vault contents.
    pub fn persist(&self, dir: &Path) -> Result<(), VaultError> {
        fs::create_dir_all(dir)?;
        let mut records = BTreeMap::new();
        for c in Collection::ALL {
            let mut out = String::new();
            let mut n = 0;
            for vc in self.chunks(c) {
                let rec = Record {
                    chunk: vc.chunk.clone(),
                    provenance: vc.provenance,
                    created_at: vc.created_at,
                    approved: vc.approved,
                    embedding: encode_embedding(&vc.embedding),
                };
                out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
                out.push('\n');
                n += 1;
            }
            write_atomic(&dir.join(file_name(c)), out.as_bytes())?;
            records.insert(c.as_str().to_string(), n);
        }
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            dimension: self.dimension,
            collections: Collection::ALL
                .iter()
                .map(|c| c.as_str().to_string())
                .collect(),
            records,
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        write_atomic(&dir.join(MANIFEST), text.as_bytes())
    }

    pub fn load(dir: &Path) -> Result<Vault, VaultError> {
        let corrupt = |file: &str, record: usize, message: String| VaultError::CorruptStore {
            file: file.to_string(),
            record,
            message,
        };
        let raw = fs::read_to_string(dir.join(MANIFEST))?;
        let version: serde_json::Value =
            serde_json::from_str(&raw).map_err(|e| corrupt(MANIFEST, 0, e.to_string()))?;
        let found = version
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| corrupt(MANIFEST, 0, "missing format_version".into()))?;
        if found != FORMAT_VERSION as u64 {
            return Err(VaultError::VersionMismatch {
                found: found as u32,
                expected: FORMAT_VERSION,
            });
        }
        let manifest: Manifest =
            serde_json::from_value(version).map_err(|e| corrupt(MANIFEST, 0, e.to_string()))?;
        let mut vault = Vault::new(manifest.dimension);
        for c in Collection::ALL {
            let name = file_name(c);
            let path = dir.join(&name);
            let text = if path.exists() {
                fs::read_to_string(&path)?
            } else {
                String::new()
            };
            if !text.is_empty() && !text.ends_with('\n') {
                let at = text.lines().count();
                return Err(corrupt(&name, at, "truncated record".into()));
            }
            let store = vault.collections.entry(c).or_default();
            let mut count = 0;
            for (i, line) in text.lines().enumerate() {
                let idx = i + 1;
                let rec: Record =
                    serde_json::from_str(line).map_err(|e| corrupt(&name, idx, e.to_string()))?;
                let embedding =
                    decode_embedding(&rec.embedding).map_err(|m| corrupt(&name, idx, m))?;
                if embedding.len() != manifest.dimension {
                    return Err(corrupt(
                        &name,
                        idx,
                        format!(
                            "embedding has {} values, expected {}",
                            embedding.len(),
                            manifest.dimension
                        ),
                    ));
                }
                if rec.provenance != c.provenance() {
                    return Err(corrupt(
                        &name,
                        idx,
                        "provenance does not match collection".into(),
                    ));
                }
                store.insert(
                    rec.chunk.chunk_id.clone(),
                    VaultChunk {
                        chunk: rec.chunk,
                        embedding,
                        provenance: rec.provenance,
                        created_at: rec.created_at,
                        approved: rec.approved,
                    },
                );
                count += 1;
            }
            let expected = manifest.records.get(c.as_str()).copied().unwrap_or(0);
            if count != expected {
                return Err(corrupt(
                    &name,
                    count,
                    format!("found {count} records, manifest lists {expected}"),
                ));
            }
        }
        Ok(vault)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{ChunkLevel, SectionKind};

    fn sample() -> Vault {
        let mut v = Vault::new(3);
        let chunk = |id: &str| Chunk {
            chunk_id: id.into(),
            doc_id: "d".into(),
            section_kind: SectionKind::Experience,
            level: ChunkLevel::Bullet,
            parent_id: Some("d/s0/e0".into()),
            text: format!("text of {id}"),
            employer: Some("Acme".into()),
            metadata: [("title".to_string(), "Analyst".to_string())].into(),
        };
        v.index_chunks(
            Collection::ResumeHistory,
            vec![chunk("b"), chunk("a")],
            vec![vec![1.0, 0.2, 0.0], vec![0.0, 1.0, 0.5]],
        )
        .unwrap();
        v.index_chunks(
            Collection::CareerRecords,
            vec![chunk("c")],
            vec![vec![0.3, 0.3, 0.3]],
        )
        .unwrap();
        v
    }

    #[test]
    fn round_trip_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let v = sample();
        v.persist(dir.path()).unwrap();
        let first = fs::read(dir.path().join("resume_history.jsonl")).unwrap();
        let loaded = Vault::load(dir.path()).unwrap();
        assert_eq!(loaded.len(), 3);
        let dir2 = tempfile::tempdir().unwrap();
        loaded.persist(dir2.path()).unwrap();
        assert_eq!(
            first,
            fs::read(dir2.path().join("resume_history.jsonl")).unwrap()
        );
        for c in Collection::ALL {
            let a: Vec<_> = v.chunks(c).collect();
            let b: Vec<_> = loaded.chunks(c).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn empty_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        Vault::new(8).persist(dir.path()).unwrap();
        let v = Vault::load(dir.path()).unwrap();
        assert!(v.is_empty());
        assert_eq!(v.dimension(), 8);
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        sample().persist(dir.path()).unwrap();
        let path = dir.path().join("resume_history.jsonl");
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();
        assert!(matches!(
            Vault::load(dir.path()),
            Err(VaultError::CorruptStore { record: 2, .. })
        ));
        // Dropping a whole line is caught by the manifest count.
        let text = String::from_utf8(bytes).unwrap();
        let first_line = text.lines().next().unwrap();
        fs::write(&path, format!("{first_line}\n")).unwrap();
        assert!(matches!(
            Vault::load(dir.path()),
            Err(VaultError::CorruptStore { .. })
        ));
    }

    #[test]
    fn version_checked() {
        let dir = tempfile::tempdir().unwrap();
        sample().persist(dir.path()).unwrap();
        let path = dir.path().join(MANIFEST);
        let text = fs::read_to_string(&path)
            .unwrap()
            .replace("\"format_version\": 1", "\"format_version\": 9");
        fs::write(&path, text).unwrap();
        assert!(matches!(
            Vault::load(dir.path()),
            Err(VaultError::VersionMismatch {
                found: 9,
                expected: 1
            })
        ));
    }

    #[test]
    fn second_writer_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let lock = VaultLock::acquire(dir.path()).unwrap();
        assert!(matches!(
            VaultLock::acquire(dir.path()),
            Err(VaultError::Locked)
        ));
        drop(lock);
        assert!(VaultLock::acquire(dir.path()).is_ok());
    }
}
