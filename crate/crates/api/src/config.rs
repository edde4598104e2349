//! Service configuration: one TOML file plus environment overrides.
//! Precedence is environment, then file, then built-in defaults.

use std::path::{Path, PathBuf};

use depgate_core::gate::PolicyConfig;
use depgate_core::sync::RegistrySettings;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration in {path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WebhookTarget {
    pub url: String,
    /// HMAC-SHA256 signing key.
    pub secret: String,
    #[serde(default = "enabled_default")]
    pub enabled: bool,
}

fn enabled_default() -> bool {
    true
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyncSources {
    /// Feed directory scanned on every `/v1/sync/run`.
    pub feeds_dir: Option<PathBuf>,
    pub registries: RegistrySettings,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    listen: Option<String>,
    database: Option<PathBuf>,
    policy_file: Option<PathBuf>,
    api_token: Option<String>,
    ui_dir: Option<PathBuf>,
    internal_prefixes: Option<Vec<String>>,
    webhooks: Vec<WebhookTarget>,
    sync: SyncSources,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub listen: String,
    pub database: PathBuf,
    pub policy_file: Option<PathBuf>,
    pub policy: PolicyConfig,
    pub api_token: Option<String>,
    pub ui_dir: Option<PathBuf>,
    pub internal_prefixes: Vec<String>,
    pub webhooks: Vec<WebhookTarget>,
    pub sync: SyncSources,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: "127.0.0.1:8080".into(),
            database: PathBuf::from("depgate.db"),
            policy_file: None,
            policy: PolicyConfig::default(),
            api_token: None,
            ui_dir: None,
            internal_prefixes: Vec::new(),
            webhooks: Vec::new(),
            sync: SyncSources::default(),
        }
    }
}

/// Environment variables read by [`load_config`].
pub const ENV_VARS: &[&str] = &[
    "DEPGATE_LISTEN",
    "DEPGATE_DB",
    "DEPGATE_POLICY",
    "DEPGATE_API_TOKEN",
    "DEPGATE_UI_DIR",
    "DEPGATE_FEEDS_DIR",
];

/// Loads `path` (if any), applies overrides from `env`, then reads the
/// policy file. Relative paths in the file are relative to its directory.
pub fn load_config(path: Option<&Path>, env: impl Fn(&str) -> Option<String>) -> Result<ServiceConfig, ConfigError> {
    let mut cfg = ServiceConfig::default();
    if let Some(path) = path {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let file: FileConfig = toml::from_str(&text).map_err(|e| ConfigError::Invalid {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rel = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        if let Some(v) = file.listen {
            cfg.listen = v;
        }
        if let Some(v) = file.database {
            cfg.database = rel(v);
        }
        cfg.policy_file = file.policy_file.map(rel);
        cfg.api_token = file.api_token;
        cfg.ui_dir = file.ui_dir.map(rel);
        cfg.internal_prefixes = file.internal_prefixes.unwrap_or_default();
        cfg.webhooks = file.webhooks;
        cfg.sync = file.sync;
        cfg.sync.feeds_dir = cfg.sync.feeds_dir.map(rel);
        cfg.sync.registries.fixture_dir = cfg.sync.registries.fixture_dir.take().map(rel);
    }

    if let Some(v) = env("DEPGATE_LISTEN") {
        cfg.listen = v;
    }
    if let Some(v) = env("DEPGATE_DB") {
        cfg.database = v.into();
    }
    if let Some(v) = env("DEPGATE_POLICY") {
        cfg.policy_file = Some(v.into());
    }
    if let Some(v) = env("DEPGATE_API_TOKEN") {
        cfg.api_token = Some(v).filter(|t| !t.is_empty());
    }
    if let Some(v) = env("DEPGATE_UI_DIR") {
        cfg.ui_dir = Some(v.into());
    }
    if let Some(v) = env("DEPGATE_FEEDS_DIR") {
        cfg.sync.feeds_dir = Some(v.into());
    }

    if let Some(p) = &cfg.policy_file {
        cfg.policy = load_policy(p)?;
    }
    for w in &cfg.webhooks {
        if w.secret.is_empty() {
            return Err(ConfigError::Invalid {
                path: path.map(Path::to_path_buf).unwrap_or_default(),
                message: format!("webhook {} has an empty secret", w.url),
            });
        }
    }
    Ok(cfg)
}

/// A TOML policy file; absent fields take their defaults.
pub fn load_policy(path: &Path) -> Result<PolicyConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_policy(&text).map_err(|message| ConfigError::Invalid {
        path: path.to_path_buf(),
        message,
    })
}

pub fn parse_policy(text: &str) -> Result<PolicyConfig, String> {
    let policy: PolicyConfig = toml::from_str(text).map_err(|e| e.to_string())?;
    policy.validate().map_err(|e| e.to_string())?;
    Ok(policy)
}
