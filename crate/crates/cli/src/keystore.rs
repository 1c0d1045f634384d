//! Directory of named key files, one `<name>.key` per identity.

use std::fs;
use std::path::PathBuf;

use rltrace_core::{Keypair, PublicKeyId};
use rltrace_node::keyfile::{self, KeyFileError};

#[derive(Debug, thiserror::Error)]
pub enum KeystoreError {
    #[error("key name {0:?} must be 1-64 characters of [A-Za-z0-9_-]")]
    BadName(String),
    #[error("no key named {name} in {dir}")]
    Unknown { name: String, dir: String },
    #[error("a key named {0} already exists")]
    Exists(String),
    #[error(transparent)]
    File(#[from] KeyFileError),
    #[error("keystore {dir}: {source}")]
    Io { dir: String, source: std::io::Error },
}

#[derive(Clone, Debug)]
pub struct Keystore {
    dir: PathBuf,
}

fn check_name(name: &str) -> Result<(), KeystoreError> {
    let ok = !name.is_empty()
        && name.len() <= 64
        && name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-');
    if ok {
        Ok(())
    } else {
        Err(KeystoreError::BadName(name.to_string()))
    }
}

impl Keystore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Keystore { dir: dir.into() }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{name}.key"))
    }

    fn io(&self, source: std::io::Error) -> KeystoreError {
        KeystoreError::Io {
            dir: self.dir.display().to_string(),
            source,
        }
    }

    pub fn generate(&self, name: &str) -> Result<Keypair, KeystoreError> {
        check_name(name)?;
        fs::create_dir_all(&self.dir).map_err(|e| self.io(e))?;
        let path = self.path(name);
        if path.exists() {
            return Err(KeystoreError::Exists(name.to_string()));
        }
        let key = Keypair::generate();
        keyfile::save(&path, &key)?;
        Ok(key)
    }

    pub fn load(&self, name: &str) -> Result<Keypair, KeystoreError> {
        check_name(name)?;
        let path = self.path(name);
        if !path.exists() {
            return Err(KeystoreError::Unknown {
                name: name.to_string(),
                dir: self.dir.display().to_string(),
            });
        }
        Ok(keyfile::load(&path)?)
    }

    /// Sorted `(name, public key)` pairs.
    pub fn list(&self) -> Result<Vec<(String, PublicKeyId)>, KeystoreError> {
        let entries = match fs::read_dir(&self.dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(self.io(e)),
        };
        let mut out = Vec::new();
        for entry in entries {
            let path = entry.map_err(|e| self.io(e))?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()).and_then(|n| n.strip_suffix(".key")) else {
                continue;
            };
            out.push((name.to_string(), keyfile::load(&path)?.public()));
        }
        out.sort();
        Ok(out)
    }

    /// A 64-character hex id is taken literally; anything else names a key.
    pub fn resolve(&self, who: &str) -> Result<PublicKeyId, KeystoreError> {
        if who.len() == 64 {
            if let Ok(id) = PublicKeyId::from_hex(who) {
                return Ok(id);
            }
        }
        Ok(self.load(who)?.public())
    }
}
