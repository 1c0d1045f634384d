//! Key files: TOML with hex `secret` and `public`, readable by owner only.

use std::fs;
use std::io::Write;
use std::path::Path;

use rltrace_core::{Keypair, PublicKeyId};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum KeyFileError {
    #[error("key file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("key file {path}: {reason}")]
    Invalid { path: String, reason: String },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyFile {
    secret: String,
    public: PublicKeyId,
}

pub fn load(path: &Path) -> Result<Keypair, KeyFileError> {
    let shown = path.display().to_string();
    let invalid = |reason: String| KeyFileError::Invalid {
        path: shown.clone(),
        reason,
    };
    let text = fs::read_to_string(path).map_err(|source| KeyFileError::Io {
        path: shown.clone(),
        source,
    })?;
    let file: KeyFile = toml::from_str(&text).map_err(|e| invalid(e.to_string()))?;
    let secret: [u8; 32] = hex::decode(file.secret.trim())
        .map_err(|e| invalid(format!("secret: {e}")))?
        .try_into()
        .map_err(|_| invalid("secret must be 32 bytes".into()))?;
    let key = Keypair::from_secret(secret);
    if key.public() != file.public {
        return Err(invalid("public key does not match the secret".into()));
    }
    Ok(key)
}

/// Writes a new key file with mode 0600. Refuses to overwrite.
pub fn save(path: &Path, key: &Keypair) -> Result<(), KeyFileError> {
    let io = |source| KeyFileError::Io {
        path: path.display().to_string(),
        source,
    };
    let body = toml::to_string(&KeyFile {
        secret: hex::encode(key.secret_bytes()),
        public: key.public(),
    })
    .expect("key file serializes");
    let mut opts = fs::OpenOptions::new();
    opts.write(true).create_new(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        opts.mode(0o600);
    }
    let mut f = opts.open(path).map_err(io)?;
    f.write_all(body.as_bytes()).map_err(io)?;
    f.sync_all().map_err(io)
}
