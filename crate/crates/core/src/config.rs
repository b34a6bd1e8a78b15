//! Configuration file, named gateway profiles and flag overrides.
//!
//! Precedence: flags, then `TAILOR_DATA_DIR` (data dir only), then the file,
//! then built-in defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::gateway::{Backend, GatewayConfig, MockMode};
use crate::generation::RenderFormat;
use crate::jd::SkillLexicon;
use crate::pipeline::RunConfig;

pub const DATA_DIR_ENV: &str = "TAILOR_DATA_DIR";
pub const DEFAULT_DATA_DIR: &str = "tailor-data";
pub const DEFAULT_PROFILE: &str = "mock";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: at `{field}`: {message}")]
    Parse {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error("unknown gateway profile {0:?}")]
    UnknownProfile(String),
    #[error("invalid {field}: {message}")]
    Invalid { field: String, message: String },
}

/// Per-field run settings; unset fields leave the underlying value alone.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOverrides {
    pub alpha: Option<f64>,
    pub tau: Option<f64>,
    pub tau_fallback: Option<f64>,
    pub retrieval_enabled: Option<bool>,
    pub k: Option<usize>,
    pub max_extra_review_passes: Option<u32>,
    pub seed: Option<u64>,
    pub llm_fallback: Option<bool>,
    pub llm_jd_extraction: Option<bool>,
    pub formats: Option<Vec<RenderFormat>>,
}

impl RunOverrides {
    pub fn apply(&self, base: &RunConfig) -> RunConfig {
        let mut c = base.clone();
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = &self.$f { c.$f = v.clone(); } )* };
        }
        take!(
            alpha,
            tau,
            tau_fallback,
            retrieval_enabled,
            k,
            max_extra_review_passes,
            seed,
            llm_fallback,
            llm_jd_extraction,
            formats
        );
        c
    }
}

/// On-disk configuration file (JSON). Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub data_dir: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub gateway_profile: Option<String>,
    pub gateway_profiles: BTreeMap<String, GatewayConfig>,
    pub run: RunOverrides,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, ConfigError> {
        let raw = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let de = &mut serde_json::Deserializer::from_str(&raw);
        serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }
}

/// Profiles available without a config file.
pub fn builtin_profiles() -> BTreeMap<String, GatewayConfig> {
    let mut out = BTreeMap::new();
    out.insert(
        "mock".into(),
        GatewayConfig::mock(MockMode::IdentityRewrite),
    );
    out.insert(
        "mock-scripted".into(),
        GatewayConfig::mock(MockMode::Scripted),
    );
    out.insert(
        "mock-adversarial".into(),
        GatewayConfig::mock(MockMode::Adversarial),
    );
    out.insert(
        "mock-offline".into(),
        GatewayConfig::mock(MockMode::Offline),
    );
    out.insert(
        "openai".into(),
        GatewayConfig {
            backend: Backend::Http,
            ..GatewayConfig::default()
        },
    );
    out
}

/// Values given on the command line.
#[derive(Debug, Clone, Default)]
pub struct FlagOverrides {
    pub config_file: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
    pub gateway_profile: Option<String>,
    pub lexicon: Option<PathBuf>,
    pub run: RunOverrides,
}

#[derive(Debug, Clone)]
pub struct Resolved {
    pub data_dir: PathBuf,
    pub profile: String,
    pub gateway: GatewayConfig,
    pub lexicon: SkillLexicon,
    pub run: RunConfig,
}

pub fn resolve(flags: &FlagOverrides) -> Result<Resolved, ConfigError> {
    let file = match &flags.config_file {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let data_dir = flags
        .data_dir
        .clone()
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
        .or(file.data_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR));
    let mut profiles = builtin_profiles();
    profiles.extend(file.gateway_profiles.clone());
    let profile = flags
        .gateway_profile
        .clone()
        .or(file.gateway_profile.clone())
        .unwrap_or_else(|| DEFAULT_PROFILE.to_string());
    let gateway = profiles
        .get(&profile)
        .cloned()
        .ok_or_else(|| ConfigError::UnknownProfile(profile.clone()))?;
    let lexicon = match flags.lexicon.as_ref().or(file.lexicon.as_ref()) {
        Some(p) => SkillLexicon::load(p).map_err(|e| ConfigError::Invalid {
            field: "lexicon".into(),
            message: e.to_string(),
        })?,
        None => SkillLexicon::default(),
    };
    let run = flags.run.apply(&file.run.apply(&RunConfig::default()));
    run.validate()
        .map_err(|(field, message)| ConfigError::Invalid {
            field: field.to_string(),
            message,
        })?;
    Ok(Resolved {
        data_dir,
        profile,
        gateway,
        lexicon,
        run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beat_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tailor.json");
        std::fs::write(
            &path,
            r#"{"data_dir": "from-file", "run": {"tau": 0.8, "seed": 7}, "gateway_profile": "mock-offline"}"#,
        )
        .unwrap();
        let flags = FlagOverrides {
            config_file: Some(path),
            data_dir: Some("from-flag".into()),
            run: RunOverrides {
                seed: Some(9),
                ..Default::default()
            },
            ..Default::default()
        };
        let r = resolve(&flags).unwrap();
        assert_eq!(r.data_dir, PathBuf::from("from-flag"));
        assert_eq!(r.run.tau, 0.8);
        assert_eq!(r.run.seed, 9);
        assert_eq!(r.run.alpha, 0.6);
        assert_eq!(r.gateway.mock_mode, MockMode::Offline);
    }

    #[test]
    fn parse_errors_name_the_field() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tailor.json");
        std::fs::write(&path, r#"{"run": {"alpha": "high"}}"#).unwrap();
        match FileConfig::load(&path) {
            Err(ConfigError::Parse { field, .. }) => assert_eq!(field, "run.alpha"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_profile_rejected() {
        let flags = FlagOverrides {
            gateway_profile: Some("nope".into()),
            ..Default::default()
        };
        assert!(matches!(
            resolve(&flags),
            Err(ConfigError::UnknownProfile(_))
        ));
    }
}
