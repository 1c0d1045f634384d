use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::NodeError;

pub const DEFAULT_SEAL_INTERVAL_MS: u64 = 500;

/// Node settings, loadable from TOML:
///
/// ```toml
/// listen = "127.0.0.1:7700"
/// data_dir = "data"
/// genesis = "genesis.toml"
/// validator_key = "keys/operator.toml"   # omit for a query-only node
/// seal_interval_ms = 500
/// allow_empty = false
/// record_stores = []                      # extra store roots for audits
/// ```
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    #[serde(default = "default_listen")]
    pub listen: SocketAddr,
    pub data_dir: PathBuf,
    pub genesis: PathBuf,
    #[serde(default)]
    pub validator_key: Option<PathBuf>,
    #[serde(default = "default_interval")]
    pub seal_interval_ms: u64,
    #[serde(default)]
    pub allow_empty: bool,
    #[serde(default)]
    pub record_stores: Vec<PathBuf>,
}

fn default_listen() -> SocketAddr {
    "127.0.0.1:7700".parse().unwrap()
}

fn default_interval() -> u64 {
    DEFAULT_SEAL_INTERVAL_MS
}

impl NodeConfig {
    pub fn new(data_dir: impl Into<PathBuf>, genesis: impl Into<PathBuf>) -> Self {
        NodeConfig {
            listen: default_listen(),
            data_dir: data_dir.into(),
            genesis: genesis.into(),
            validator_key: None,
            seal_interval_ms: DEFAULT_SEAL_INTERVAL_MS,
            allow_empty: false,
            record_stores: Vec::new(),
        }
    }

    /// Relative paths resolve against the config file's directory.
    pub fn load(path: &Path) -> Result<Self, NodeError> {
        let text = std::fs::read_to_string(path).map_err(|e| NodeError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: NodeConfig = toml::from_str(&text).map_err(|e| NodeError::Config(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.data_dir);
        fix(&mut cfg.genesis);
        if let Some(k) = cfg.validator_key.as_mut() {
            fix(k);
        }
        cfg.record_stores.iter_mut().for_each(fix);
        Ok(cfg)
    }
}
