use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::wire::{DEFAULT_PAGE_SIZE, MAX_PAGE_SIZE};

pub const ENV_FEED_URL: &str = "EARMARK_FEED_URL";
pub const ENV_FEED_TOKEN: &str = "EARMARK_FEED_TOKEN";

/// Feed connection settings. Read from a TOML file, then overridden by
/// `EARMARK_FEED_URL` and `EARMARK_FEED_TOKEN`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeedConfig {
    pub base_url: String,
    pub token: Option<String>,
    pub page_size: u32,
    /// Retries after the first failed attempt of a request.
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
    pub timeout_ms: u64,
}

impl Default for FeedConfig {
    fn default() -> Self {
        FeedConfig {
            base_url: "http://127.0.0.1:8085".into(),
            token: None,
            page_size: DEFAULT_PAGE_SIZE,
            max_retries: 5,
            initial_backoff_ms: 250,
            max_backoff_ms: 10_000,
            timeout_ms: 10_000,
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
    #[error("feed config: {0}")]
    Parse(String),
    #[error("feed config: {0}")]
    Invalid(String),
}

impl FeedConfig {
    pub fn from_toml(text: &str) -> Result<FeedConfig, ConfigError> {
        let cfg: FeedConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults, then the file if given, then the environment.
    pub fn load(path: Option<&Path>) -> Result<FeedConfig, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.display().to_string(),
                    source,
                })?;
                FeedConfig::from_toml(&text)?
            }
            None => FeedConfig::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok());
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) {
        if let Some(url) = get(ENV_FEED_URL).filter(|s| !s.is_empty()) {
            self.base_url = url;
        }
        if let Some(token) = get(ENV_FEED_TOKEN).filter(|s| !s.is_empty()) {
            self.token = Some(token);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(ConfigError::Invalid(format!("base_url {:?} is not an http(s) URL", self.base_url)));
        }
        if !(1..=MAX_PAGE_SIZE).contains(&self.page_size) {
            return Err(ConfigError::Invalid(format!("page_size must be in 1..={MAX_PAGE_SIZE}")));
        }
        if self.initial_backoff_ms > self.max_backoff_ms {
            return Err(ConfigError::Invalid("initial_backoff_ms exceeds max_backoff_ms".into()));
        }
        Ok(())
    }

    pub fn events_url(&self) -> String {
        format!("{}{}", self.base_url.trim_end_matches('/'), crate::EVENTS_PATH)
    }
}
