//! Baseline-versus-vault comparison over a labelled JD set.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ats::{compare_runs, grouped_means, markdown_table, DeltaReport, Group, GroupMean};
use crate::engine::{Engine, EngineError};
use crate::pipeline::{RunConfig, RunInputs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentJd {
    pub name: String,
    pub jd_text: String,
    pub group: Group,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<DeltaReport>,
    pub means: Vec<GroupMean>,
    pub table: String,
    /// (baseline, vault) run ids per JD, in row order.
    pub run_ids: Vec<(String, String)>,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> EngineError + '_ {
    move |source| EngineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads every JD named in the groups file (`{"file.txt": "aligned", ...}`)
/// from `jd_dir`, in file-name order.
pub fn load_jd_set(jd_dir: &Path, groups_file: &Path) -> Result<Vec<ExperimentJd>, EngineError> {
    let raw = std::fs::read_to_string(groups_file).map_err(io(groups_file))?;
    let groups: BTreeMap<String, Group> =
        serde_json::from_str(&raw).map_err(|source| EngineError::Json {
            path: groups_file.to_path_buf(),
            source,
        })?;
    let mut out = Vec::with_capacity(groups.len());
    for (name, group) in groups {
        let path = jd_dir.join(&name);
        let jd_text = std::fs::read_to_string(&path).map_err(io(&path))?;
        out.push(ExperimentJd {
            name,
            jd_text,
            group,
        });
    }
    Ok(out)
}

/// Runs both conditions for each JD in order, against one vault snapshot.
pub fn compare(
    engine: &Engine,
    jds: &[ExperimentJd],
    resume: &RunInputs,
    config: &RunConfig,
) -> Result<ExperimentReport, EngineError> {
    if jds.is_empty() {
        return Err(EngineError::InvalidInput {
            field: "jds".into(),
            message: "at least one JD is required".into(),
        });
    }
    engine.with_vault(|vault| {
        let mut rows = Vec::with_capacity(jds.len());
        let mut run_ids = Vec::with_capacity(jds.len());
        for jd in jds {
            let inputs = RunInputs {
                jd_text: jd.jd_text.clone(),
                ..resume.clone()
            };
            let base_cfg = RunConfig {
                retrieval_enabled: false,
                ..config.clone()
            };
            let vault_cfg = RunConfig {
                retrieval_enabled: true,
                ..config.clone()
            };
            let base = engine.run_on(vault, &inputs, &base_cfg)?;
            let with_vault = engine.run_on(vault, &inputs, &vault_cfg)?;
            let (bj, vj) = (base.jd.as_ref().unwrap(), with_vault.jd.as_ref().unwrap());
            let row = compare_runs(
                &jd.name,
                &bj.jd_id,
                base.ats.as_ref().unwrap(),
                &vj.jd_id,
                with_vault.ats.as_ref().unwrap(),
                jd.group,
            )
            .map_err(|e| EngineError::InvalidInput {
                field: "jds".into(),
                message: e.to_string(),
            })?;
            rows.push(row);
            run_ids.push((base.run_id, with_vault.run_id));
        }
        Ok(ExperimentReport {
            means: grouped_means(&rows),
            table: markdown_table(&rows),
            rows,
            run_ids,
        })
    })
}
