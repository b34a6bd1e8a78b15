//! Run history in a single SQLite file (WAL journal).

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use parking_lot::Mutex;
use rusqlite::{params, Connection, OptionalExtension, Row};
use serde::{Deserialize, Serialize};

use crate::ats::Verdict;
use crate::pipeline::Condition;
use crate::vault::RunRegistry;

pub const SCHEMA_VERSION: i64 = 1;

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS runs (
    run_id      TEXT PRIMARY KEY,
    created_at  TEXT NOT NULL,
    jd_hash     TEXT NOT NULL,
    condition   TEXT NOT NULL CHECK (condition IN ('baseline', 'vault')),
    overall_fit REAL,
    best_profile REAL,
    verdict     TEXT,
    status      TEXT NOT NULL CHECK (status IN ('running', 'done', 'failed')),
    trace_path  TEXT NOT NULL,
    error       TEXT
);
CREATE INDEX IF NOT EXISTS runs_created ON runs (created_at, run_id);
";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("run store {path} is corrupt: {message}. Recovery: move the file aside and restart; history starts empty and run directories are kept")]
    StoreCorrupt { path: PathBuf, message: String },
    #[error("run {0} already exists")]
    Duplicate(String),
    #[error(transparent)]
    Sqlite(#[from] rusqlite::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Done,
    Failed,
}

impl RunStatus {
    fn as_str(self) -> &'static str {
        match self {
            RunStatus::Running => "running",
            RunStatus::Done => "done",
            RunStatus::Failed => "failed",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [RunStatus::Running, RunStatus::Done, RunStatus::Failed]
            .into_iter()
            .find(|r| r.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub created_at: DateTime<Utc>,
    pub jd_hash: String,
    pub condition: Condition,
    pub overall_fit: Option<f64>,
    pub best_profile: Option<f64>,
    pub verdict: Option<Verdict>,
    pub status: RunStatus,
    pub trace_path: String,
    pub error: Option<String>,
}

fn verdict_str(v: Verdict) -> &'static str {
    v.as_str()
}

fn parse_verdict(s: &str) -> Option<Verdict> {
    [Verdict::Strong, Verdict::Competitive, Verdict::Partial]
        .into_iter()
        .find(|v| v.as_str() == s)
}

fn from_row(row: &Row<'_>) -> rusqlite::Result<RunRecord> {
    let bad = |i: usize, what: &str| {
        rusqlite::Error::FromSqlConversionFailure(
            i,
            rusqlite::types::Type::Text,
            what.to_string().into(),
        )
    };
    let created: String = row.get(1)?;
    let condition: String = row.get(3)?;
    let verdict: Option<String> = row.get(6)?;
    let status: String = row.get(7)?;
    Ok(RunRecord {
        run_id: row.get(0)?,
        created_at: DateTime::parse_from_rfc3339(&created)
            .map_err(|_| bad(1, "created_at"))?
            .with_timezone(&Utc),
        jd_hash: row.get(2)?,
        condition: match condition.as_str() {
            "baseline" => Condition::Baseline,
            "vault" => Condition::Vault,
            _ => return Err(bad(3, "condition")),
        },
        overall_fit: row.get(4)?,
        best_profile: row.get(5)?,
        verdict: match verdict {
            Some(v) => Some(parse_verdict(&v).ok_or_else(|| bad(6, "verdict"))?),
            None => None,
        },
        status: RunStatus::parse(&status).ok_or_else(|| bad(7, "status"))?,
        trace_path: row.get(8)?,
        error: row.get(9)?,
    })
}

const COLUMNS: &str =
    "run_id, created_at, jd_hash, condition, overall_fit, best_profile, verdict, status, trace_path, error";

pub struct RunStore {
    path: PathBuf,
    conn: Mutex<Connection>,
}

impl RunStore {
    /// Opens or creates the store. A missing file yields an empty history.
    pub fn open(path: &Path) -> Result<RunStore, StoreError> {
        let corrupt = |e: rusqlite::Error| StoreError::StoreCorrupt {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        let conn = Connection::open(path).map_err(corrupt)?;
        conn.busy_timeout(std::time::Duration::from_secs(5))
            .map_err(corrupt)?;
        let version: i64 = conn
            .query_row("PRAGMA user_version", [], |r| r.get(0))
            .map_err(corrupt)?;
        if version > SCHEMA_VERSION {
            return Err(StoreError::StoreCorrupt {
                path: path.to_path_buf(),
                message: format!("schema version {version} is newer than {SCHEMA_VERSION}"),
            });
        }
        conn.pragma_update(None, "journal_mode", "WAL")
            .map_err(corrupt)?;
        conn.execute_batch(SCHEMA).map_err(corrupt)?;
        conn.pragma_update(None, "user_version", SCHEMA_VERSION)
            .map_err(corrupt)?;
        let check: String = conn
            .query_row("PRAGMA quick_check", [], |r| r.get(0))
            .map_err(corrupt)?;
        if check != "ok" {
            return Err(StoreError::StoreCorrupt {
                path: path.to_path_buf(),
                message: check,
            });
        }
        Ok(RunStore {
            path: path.to_path_buf(),
            conn: Mutex::new(conn),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn insert(&self, r: &RunRecord) -> Result<(), StoreError> {
        let conn = self.conn.lock();
        let res = conn.execute(
            &format!(
                "INSERT INTO runs ({COLUMNS}) VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10)"
            ),
            params![
                r.run_id,
                r.created_at.to_rfc3339(),
                r.jd_hash,
                r.condition.as_str(),
                r.overall_fit,
                r.best_profile,
                r.verdict.map(verdict_str),
                r.status.as_str(),
                r.trace_path,
                r.error,
            ],
        );
        match res {
            Ok(_) => Ok(()),
            Err(rusqlite::Error::SqliteFailure(e, _))
                if e.code == rusqlite::ErrorCode::ConstraintViolation =>
            {
                Err(StoreError::Duplicate(r.run_id.clone()))
            }
            Err(e) => Err(e.into()),
        }
    }

    pub fn finish(
        &self,
        run_id: &str,
        overall: f64,
        best: f64,
        verdict: Verdict,
    ) -> Result<(), StoreError> {
        self.conn.lock().execute(
            "UPDATE runs SET status = 'done', overall_fit = ?2, best_profile = ?3, verdict = ?4 WHERE run_id = ?1",
            params![run_id, overall, best, verdict_str(verdict)],
        )?;
        Ok(())
    }

    pub fn fail(&self, run_id: &str, error: &str) -> Result<(), StoreError> {
        self.conn.lock().execute(
            "UPDATE runs SET status = 'failed', error = ?2 WHERE run_id = ?1",
            params![run_id, error],
        )?;
        Ok(())
    }

    pub fn get(&self, run_id: &str) -> Result<Option<RunRecord>, StoreError> {
        let conn = self.conn.lock();
        Ok(conn
            .query_row(
                &format!("SELECT {COLUMNS} FROM runs WHERE run_id = ?1"),
                [run_id],
                from_row,
            )
            .optional()?)
    }

    /// All runs, oldest first.
    pub fn list(&self) -> Result<Vec<RunRecord>, StoreError> {
        let conn = self.conn.lock();
        let mut stmt = conn.prepare(&format!(
            "SELECT {COLUMNS} FROM runs ORDER BY created_at, run_id"
        ))?;
        let rows = stmt.query_map([], from_row)?;
        Ok(rows.collect::<Result<_, _>>()?)
    }
}

impl RunRegistry for RunStore {
    fn contains_run(&self, run_id: &str) -> bool {
        matches!(self.get(run_id), Ok(Some(r)) if r.status == RunStatus::Done)
    }
}
