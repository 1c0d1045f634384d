use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::OffchainError;
use crate::hash::Hash256;

pub const MAX_RECORD_BYTES: usize = 1024 * 1024;

/// Records addressed by their SHA-256, fanned out as `aa/bb/<hex>.rec`.
#[derive(Clone, Debug)]
pub struct ContentStore {
    dir: PathBuf,
}

impl ContentStore {
    pub fn open(dir: &Path) -> Result<Self, OffchainError> {
        fs::create_dir_all(dir)?;
        Ok(ContentStore { dir: dir.to_path_buf() })
    }

    pub fn path_for(&self, address: &Hash256) -> PathBuf {
        let hex = address.to_hex();
        self.dir.join(&hex[0..2]).join(&hex[2..4]).join(format!("{hex}.rec"))
    }

    pub fn contains(&self, address: &Hash256) -> bool {
        self.path_for(address).is_file()
    }

    /// Idempotent. A damaged copy already on disk is replaced.
    pub fn put(&self, bytes: &[u8]) -> Result<Hash256, OffchainError> {
        if bytes.len() > MAX_RECORD_BYTES {
            return Err(OffchainError::TooLarge { len: bytes.len() });
        }
        let address = Hash256::digest(bytes);
        let path = self.path_for(&address);
        if let Ok(existing) = fs::read(&path) {
            if Hash256::digest(&existing) == address {
                return Ok(address);
            }
        }
        let parent = path.parent().expect("fan-out dir");
        fs::create_dir_all(parent)?;
        let tmp = parent.join(format!(".{}.{}.tmp", address.to_hex(), std::process::id()));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(address)
    }

    pub fn get(&self, address: &Hash256) -> Result<Vec<u8>, OffchainError> {
        let bytes = match fs::read(self.path_for(address)) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(OffchainError::NotFound(format!("record {address}")))
            }
            Err(e) => return Err(e.into()),
        };
        let actual = Hash256::digest(&bytes);
        if actual != *address {
            return Err(OffchainError::IntegrityFailure(format!(
                "record {address} hashes to {actual}"
            )));
        }
        Ok(bytes)
    }
}
