use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::OffchainError;
use crate::crypto::PublicKeyId;
use crate::hash::Hash256;
use crate::merkle::{merkle_root, LEAF_PREFIX};

pub const MAX_KEY_CHARS: usize = 256;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TocEntry {
    pub index: u64,
    pub key: String,
    pub content_hash: Hash256,
    pub entry_hash: Hash256,
}

/// `0x00 || u32 BE key length || key || content_hash`
pub fn entry_preimage(key: &str, content_hash: &Hash256) -> Vec<u8> {
    let mut out = Vec::with_capacity(1 + 4 + key.len() + 32);
    out.push(LEAF_PREFIX);
    out.extend_from_slice(&(key.len() as u32).to_be_bytes());
    out.extend_from_slice(key.as_bytes());
    out.extend_from_slice(&content_hash.0);
    out
}

pub fn entry_hash(key: &str, content_hash: &Hash256) -> Hash256 {
    Hash256::digest(&entry_preimage(key, content_hash))
}

/// A stakeholder's ordered list of record entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Toc {
    owner: PublicKeyId,
    entries: Vec<TocEntry>,
}

impl Toc {
    pub fn new(owner: PublicKeyId) -> Self {
        Toc {
            owner,
            entries: Vec::new(),
        }
    }

    pub fn owner(&self) -> &PublicKeyId {
        &self.owner
    }

    pub fn entries(&self) -> &[TocEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, key: &str, content_hash: Hash256) -> &TocEntry {
        let entry = TocEntry {
            index: self.entries.len() as u64,
            key: key.to_owned(),
            content_hash,
            entry_hash: entry_hash(key, &content_hash),
        };
        self.entries.push(entry);
        self.entries.last().unwrap()
    }

    /// Merkle root over the first `length` entry hashes.
    pub fn prefix_root(&self, length: usize) -> Hash256 {
        let leaves: Vec<Hash256> = self.entries[..length.min(self.entries.len())]
            .iter()
            .map(|e| e.entry_hash)
            .collect();
        merkle_root(&leaves)
    }

    pub fn root(&self) -> Hash256 {
        self.prefix_root(self.entries.len())
    }

    pub fn find_content(&self, content_hash: &Hash256) -> Option<&TocEntry> {
        self.entries.iter().find(|e| e.content_hash == *content_hash)
    }

    /// Loads a TOC file; a missing file is an empty TOC. A torn final
    /// record is ignored.
    pub fn load(owner: PublicKeyId, path: &Path) -> Result<Toc, OffchainError> {
        let bytes = match fs::read(path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Toc::new(owner)),
            Err(e) => return Err(e.into()),
        };
        let (toc, _) = parse(owner, &bytes)?;
        Ok(toc)
    }
}

/// Parses complete records and returns the byte length they span.
fn parse(owner: PublicKeyId, bytes: &[u8]) -> Result<(Toc, usize), OffchainError> {
    let corrupt = |at: usize, why: &str| {
        OffchainError::IntegrityFailure(format!("TOC {} record at byte {at}: {why}", owner.short()))
    };
    let mut toc = Toc::new(owner);
    let mut pos = 0;
    while bytes.len() - pos >= 4 {
        let len = u32::from_be_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
        if bytes.len() - pos - 4 < len {
            break;
        }
        let rec = &bytes[pos + 4..pos + 4 + len];
        if len < 1 + 4 + 32 || rec[0] != LEAF_PREFIX {
            return Err(corrupt(pos, "malformed entry"));
        }
        let key_len = u32::from_be_bytes(rec[1..5].try_into().unwrap()) as usize;
        if 5 + key_len + 32 != len {
            return Err(corrupt(pos, "key length mismatch"));
        }
        let key = std::str::from_utf8(&rec[5..5 + key_len]).map_err(|_| corrupt(pos, "key is not UTF-8"))?;
        let content = Hash256(rec[5 + key_len..].try_into().unwrap());
        toc.push(key, content);
        pos += 4 + len;
    }
    Ok((toc, pos))
}

pub(super) fn append(path: &Path, key: &str, content_hash: Hash256) -> Result<TocEntry, OffchainError> {
    let n = key.chars().count();
    if n > MAX_KEY_CHARS {
        return Err(OffchainError::InvalidKey(format!("{n} chars, limit {MAX_KEY_CHARS}")));
    }
    let owner = PublicKeyId::ZERO;
    let existing = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let (mut toc, valid) = parse(owner, &existing)?;
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    if valid < existing.len() {
        file.set_len(valid as u64)?;
    }
    let preimage = entry_preimage(key, &content_hash);
    let mut record = Vec::with_capacity(preimage.len() + 4);
    record.extend_from_slice(&(preimage.len() as u32).to_be_bytes());
    record.extend_from_slice(&preimage);
    file.write_all(&record)?;
    file.sync_data()?;
    Ok(toc.push(key, content_hash).clone())
}
