//! Genesis configuration: chain id, validator set and registrar set.
//!
//! Stored as TOML:
//!
//! ```toml
//! chain_id = 1
//! genesis_time = 1700000000
//! validators = ["<64 hex chars>", ...]
//! registrars = ["<64 hex chars>", ...]
//! ```

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::crypto::PublicKeyId;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenesisConfig {
    pub chain_id: u64,
    /// Unix seconds stamped on block 0.
    #[serde(default)]
    pub genesis_time: u64,
    pub validators: Vec<PublicKeyId>,
    #[serde(default)]
    pub registrars: Vec<PublicKeyId>,
}

#[derive(Debug, thiserror::Error)]
pub enum GenesisError {
    #[error("reading genesis file: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing genesis file: {0}")]
    Parse(String),
    #[error("invalid genesis: {0}")]
    Invalid(String),
}

impl GenesisConfig {
    pub fn new(chain_id: u64, validators: Vec<PublicKeyId>, registrars: Vec<PublicKeyId>) -> Self {
        GenesisConfig {
            chain_id,
            genesis_time: 0,
            validators,
            registrars,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, GenesisError> {
        let cfg: GenesisConfig = toml::from_str(text).map_err(|e| GenesisError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("genesis config always serializes")
    }

    pub fn load(path: &Path) -> Result<Self, GenesisError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), GenesisError> {
        if self.validators.is_empty() {
            return Err(GenesisError::Invalid("at least one validator is required".into()));
        }
        if self.validators.iter().collect::<BTreeSet<_>>().len() != self.validators.len() {
            return Err(GenesisError::Invalid("duplicate validator key".into()));
        }
        if self.registrars.iter().collect::<BTreeSet<_>>().len() != self.registrars.len() {
            return Err(GenesisError::Invalid("duplicate registrar key".into()));
        }
        Ok(())
    }

    pub fn is_validator(&self, key: &PublicKeyId) -> bool {
        self.validators.contains(key)
    }

    pub fn is_registrar(&self, key: &PublicKeyId) -> bool {
        self.registrars.contains(key)
    }

    /// Round-robin schedule: height `h >= 1` belongs to validator `(h - 1) mod n`.
    pub fn scheduled_proposer(&self, height: u64) -> Option<PublicKeyId> {
        if height == 0 || self.validators.is_empty() {
            return None;
        }
        let n = self.validators.len() as u64;
        Some(self.validators[((height - 1) % n) as usize])
    }
}
