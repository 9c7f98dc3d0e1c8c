use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use earmark_core::{ContourConfig, FusionConfig, SeekSchema, SeekWeights};
use earmark_ingest::FeedConfig;
use serde::{Deserialize, Serialize};

use crate::auth::Role;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: SocketAddr,
    /// SQLite registry file. Without it the registry lives in memory.
    pub registry_path: Option<PathBuf>,
    pub photo_dir: PathBuf,
    /// SEEK schema file; the bundled version 1 schema when absent.
    pub schema_path: Option<PathBuf>,
    /// When set, startup fails unless the loaded schema has this version.
    pub schema_version: Option<u32>,
    pub default_page_size: usize,
    pub max_page_size: usize,
    pub default_top_k: usize,
    pub max_upload_bytes: usize,
    pub fusion: FusionConfig,
    pub seek: SeekWeights,
    pub contour: ContourConfig,
    pub feed: Option<FeedConfig>,
    pub users: Vec<UserConfig>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserConfig {
    pub id: String,
    pub role: Role,
    pub token: String,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            registry_path: None,
            photo_dir: PathBuf::from("data/photos"),
            schema_path: None,
            schema_version: None,
            default_page_size: 50,
            max_page_size: 500,
            default_top_k: 15,
            max_upload_bytes: 64 << 20,
            fusion: FusionConfig::default(),
            seek: SeekWeights::default(),
            contour: ContourConfig::default(),
            feed: None,
            users: Vec::new(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Parse(String),
    #[error("config: {0}")]
    Invalid(String),
}

impl ServerConfig {
    pub fn from_toml(text: &str) -> Result<ServerConfig, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<ServerConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = ServerConfig::from_toml(&text)?;
        if let Some(feed) = cfg.feed.as_mut() {
            feed.apply_env(|k| std::env::var(k).ok());
        }
        Ok(cfg)
    }

    /// The schema named by the config, checked against `schema_version`.
    pub fn load_schema(&self) -> Result<SeekSchema, ConfigError> {
        let schema = match &self.schema_path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.display().to_string(),
                    source,
                })?;
                SeekSchema::from_toml(&text).map_err(|e| ConfigError::Invalid(e.to_string()))?
            }
            None => SeekSchema::default_v1(),
        };
        if let Some(v) = self.schema_version {
            if v != schema.version {
                return Err(ConfigError::Invalid(format!(
                    "schema_version {v} requested, schema file has version {}",
                    schema.version
                )));
            }
        }
        Ok(schema)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.default_page_size == 0 || self.default_page_size > self.max_page_size {
            return invalid("default_page_size must be in 1..=max_page_size".into());
        }
        if self.default_top_k == 0 {
            return invalid("default_top_k must be positive".into());
        }
        if !(self.fusion.curv_coefficient >= 0.0 && self.fusion.curv_coefficient.is_finite()) {
            return invalid("fusion.curv_coefficient must be finite and nonnegative".into());
        }
        if self.fusion.lnbnn_k == 0 {
            return invalid("fusion.lnbnn_k must be positive".into());
        }
        self.seek.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.contour.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let mut tokens = std::collections::HashSet::new();
        for u in &self.users {
            if u.token.len() < 8 {
                return invalid(format!("user {}: token shorter than 8 characters", u.id));
            }
            if !tokens.insert(&u.token) {
                return invalid(format!("user {}: token already used by another user", u.id));
            }
        }
        if let Some(feed) = &self.feed {
            feed.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        Ok(())
    }
}
