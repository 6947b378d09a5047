use std::path::{Path, PathBuf};

use cardiolabel_core::auth::{AuthConfig, HashCost};
use serde::Deserialize;
use thiserror::Error;

pub const ENV_LISTEN: &str = "CARDIOLABEL_LISTEN";
pub const ENV_DATA_DIR: &str = "CARDIOLABEL_DATA_DIR";
pub const ENV_SESSION_HOURS: &str = "CARDIOLABEL_SESSION_HOURS";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub listen: String,
    pub data_dir: PathBuf,
    pub session_hours: i64,
    pub password_memory_kib: u32,
    pub password_iterations: u32,
}

impl Default for ServerConfig {
    fn default() -> Self {
        let cost = HashCost::default();
        ServerConfig {
            listen: "127.0.0.1:8080".into(),
            data_dir: PathBuf::from("data"),
            session_hours: 24,
            password_memory_kib: cost.memory_kib,
            password_iterations: cost.iterations,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value for {name}: {value}")]
    BadValue { name: &'static str, value: String },
}

impl ServerConfig {
    /// Defaults, then the TOML file if given, then environment overrides.
    pub fn load(file: Option<&Path>) -> Result<Self, ConfigError> {
        let text = match file {
            Some(path) => Some(std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                path: path.to_path_buf(),
                source,
            })?),
            None => None,
        };
        Self::from_sources(text.as_deref(), |k| std::env::var(k).ok())
    }

    pub fn from_sources(file_text: Option<&str>, env: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let mut cfg: ServerConfig = match file_text {
            Some(t) => toml::from_str(t)?,
            None => ServerConfig::default(),
        };
        if let Some(v) = env(ENV_LISTEN) {
            cfg.listen = v;
        }
        if let Some(v) = env(ENV_DATA_DIR) {
            cfg.data_dir = PathBuf::from(v);
        }
        if let Some(v) = env(ENV_SESSION_HOURS) {
            cfg.session_hours = v.parse().map_err(|_| ConfigError::BadValue {
                name: ENV_SESSION_HOURS,
                value: v.clone(),
            })?;
        }
        if cfg.session_hours <= 0 {
            return Err(ConfigError::BadValue {
                name: "session_hours",
                value: cfg.session_hours.to_string(),
            });
        }
        if cfg.password_memory_kib < 8 || cfg.password_iterations < 1 {
            return Err(ConfigError::BadValue {
                name: "password cost",
                value: format!("{} KiB x {}", cfg.password_memory_kib, cfg.password_iterations),
            });
        }
        Ok(cfg)
    }

    pub fn auth_config(&self) -> AuthConfig {
        AuthConfig {
            session_lifetime: chrono::Duration::hours(self.session_hours),
            hash_cost: HashCost {
                memory_kib: self.password_memory_kib,
                iterations: self.password_iterations,
            },
        }
    }
}
