use std::net::SocketAddr;
use std::path::PathBuf;

use matx_core::{Error, Result};

pub const ENV_LISTEN: &str = "MATX_LISTEN";
pub const ENV_STORAGE_ROOT: &str = "MATX_STORAGE_ROOT";
pub const ENV_BACKENDS: &str = "MATX_BACKENDS";
pub const ENV_WORKERS: &str = "MATX_WORKERS";

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";
pub const DEFAULT_STORAGE_ROOT: &str = "matx-data";
pub const DEFAULT_WORKERS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    /// Holds `assets/`, `sessions/` and `reports/`.
    pub storage_root: PathBuf,
    /// Backend registry TOML; `None` uses the built-in mocks.
    pub backends: Option<PathBuf>,
    /// Jobs executing at once.
    pub workers: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: DEFAULT_LISTEN.parse().expect("valid default address"),
            storage_root: PathBuf::from(DEFAULT_STORAGE_ROOT),
            backends: None,
            workers: DEFAULT_WORKERS,
        }
    }
}

impl ServiceConfig {
    pub fn from_env() -> Result<Self> {
        Self::from_lookup(&|k| std::env::var(k).ok())
    }

    pub fn from_lookup(lookup: &dyn Fn(&str) -> Option<String>) -> Result<Self> {
        let mut cfg = ServiceConfig::default();
        if let Some(v) = lookup(ENV_LISTEN) {
            cfg.listen = v
                .parse()
                .map_err(|_| Error::Config(format!("{ENV_LISTEN}: not a socket address: `{v}`")))?;
        }
        if let Some(v) = lookup(ENV_STORAGE_ROOT) {
            cfg.storage_root = PathBuf::from(v);
        }
        if let Some(v) = lookup(ENV_BACKENDS).filter(|v| !v.is_empty()) {
            cfg.backends = Some(PathBuf::from(v));
        }
        if let Some(v) = lookup(ENV_WORKERS) {
            cfg.workers = v
                .parse()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| Error::Config(format!("{ENV_WORKERS}: not a positive count: `{v}`")))?;
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_overrides() {
        let cfg = ServiceConfig::from_lookup(&|k| match k {
            ENV_LISTEN => Some("0.0.0.0:9000".into()),
            ENV_STORAGE_ROOT => Some("/srv/matx".into()),
            ENV_BACKENDS => Some("backends.toml".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(cfg.listen.port(), 9000);
        assert_eq!(cfg.storage_root, PathBuf::from("/srv/matx"));
        assert_eq!(cfg.backends, Some(PathBuf::from("backends.toml")));
        assert_eq!(cfg.workers, DEFAULT_WORKERS);
        assert!(ServiceConfig::from_lookup(&|k| (k == ENV_WORKERS).then(|| "0".into())).is_err());
        assert!(ServiceConfig::from_lookup(&|k| (k == ENV_LISTEN).then(|| "nowhere".into())).is_err());
    }
}
