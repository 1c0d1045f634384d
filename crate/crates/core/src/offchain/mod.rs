//! Off-chain record storage.
//!
//! Each stakeholder keeps record payloads in a local content-addressed store
//! and lists them, in order, in a table of contents (TOC). Only a Merkle
//! root over the TOC entry hashes goes on-chain, via an `ANCHOR_TOC`
//! transaction. A [`MembershipProof`] ties any one entry back to an anchor.
//!
//! On-disk layout under a store root:
//!
//! ```text
//! cas/aa/bb/<64 hex>.rec     record bytes, addressed by SHA-256
//! toc/<owner hex>.log        u32 BE length + entry preimage, per entry
//! ```

mod cas;
mod toc;

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::crypto::{Keypair, PublicKeyId};
use crate::error::ErrorCode;
use crate::hash::Hash256;
use crate::merkle::{self, PathStep};
use crate::registry::types::TocAnchor;
use crate::tx::{Payload, Transaction};

pub use cas::{ContentStore, MAX_RECORD_BYTES};
pub use toc::{entry_hash, entry_preimage, Toc, TocEntry, MAX_KEY_CHARS};

#[derive(Debug, thiserror::Error)]
pub enum OffchainError {
    #[error("record is {len} bytes, limit is {MAX_RECORD_BYTES}")]
    TooLarge { len: usize },
    #[error("not found: {0}")]
    NotFound(String),
    #[error("integrity failure: {0}")]
    IntegrityFailure(String),
    #[error("permission denied: {0}")]
    PermissionDenied(String),
    #[error("index {index} outside anchored length {anchored}")]
    OutOfRange { index: u64, anchored: u64 },
    #[error("nothing new to anchor ({length} entries, {anchored} anchored)")]
    NoProgress { length: u64, anchored: u64 },
    #[error("invalid TOC key: {0}")]
    InvalidKey(String),
    #[error("off-chain store I/O: {0}")]
    Io(#[from] std::io::Error),
}

impl OffchainError {
    pub fn code(&self) -> Option<ErrorCode> {
        Some(match self {
            OffchainError::TooLarge { .. } => ErrorCode::TooLarge,
            OffchainError::NotFound(_) => ErrorCode::NotFound,
            OffchainError::IntegrityFailure(_) => ErrorCode::IntegrityFailure,
            OffchainError::PermissionDenied(_) => ErrorCode::PermissionDenied,
            OffchainError::OutOfRange { .. } => ErrorCode::OutOfRange,
            OffchainError::NoProgress { .. } => ErrorCode::NoProgress,
            OffchainError::InvalidKey(_) => ErrorCode::InvalidPayload,
            OffchainError::Io(_) => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MembershipProof {
    pub leaf_index: u64,
    pub path: Vec<PathStep>,
    pub anchor: TocAnchor,
}

/// Checks that `entry` sits at `proof.leaf_index` under `anchor.toc_root`.
pub fn verify_membership(entry: &TocEntry, proof: &MembershipProof, anchor: &TocAnchor) -> bool {
    proof.anchor == *anchor
        && entry.index == proof.leaf_index
        && entry.entry_hash == entry_hash(&entry.key, &entry.content_hash)
        && merkle::root_from_path(&entry.entry_hash, proof.leaf_index, anchor.toc_length, &proof.path)
            == Some(anchor.toc_root)
}

/// Builds a proof for entry `index` of `entries` against `anchor`.
pub fn prove_membership(entries: &[TocEntry], index: u64, anchor: &TocAnchor) -> Result<MembershipProof, OffchainError> {
    let anchored = anchor.toc_length;
    if index >= anchored || anchored > entries.len() as u64 {
        return Err(OffchainError::OutOfRange { index, anchored });
    }
    let leaves: Vec<Hash256> = entries[..anchored as usize].iter().map(|e| e.entry_hash).collect();
    let path = merkle::merkle_path(&leaves, index as usize).expect("index checked");
    Ok(MembershipProof {
        leaf_index: index,
        path,
        anchor: anchor.clone(),
    })
}

/// Root and length a new anchor would commit to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorDraft {
    pub toc_length: u64,
    pub toc_root: Hash256,
}

/// A stakeholder-local store: content-addressed records plus TOC files.
#[derive(Debug)]
pub struct OffchainStore {
    root: PathBuf,
    cas: ContentStore,
    toc_lock: Mutex<()>,
}

impl OffchainStore {
    pub fn open(root: &Path) -> Result<Self, OffchainError> {
        std::fs::create_dir_all(root.join("toc"))?;
        Ok(OffchainStore {
            root: root.to_path_buf(),
            cas: ContentStore::open(&root.join("cas"))?,
            toc_lock: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn cas(&self) -> &ContentStore {
        &self.cas
    }

    pub fn put_record(&self, bytes: &[u8]) -> Result<Hash256, OffchainError> {
        self.cas.put(bytes)
    }

    pub fn get_record(&self, address: &Hash256) -> Result<Vec<u8>, OffchainError> {
        self.cas.get(address)
    }

    pub fn toc_path(&self, owner: &PublicKeyId) -> PathBuf {
        self.root.join("toc").join(format!("{}.log", owner.to_hex()))
    }

    pub fn has_toc(&self, owner: &PublicKeyId) -> bool {
        self.toc_path(owner).exists()
    }

    pub fn toc(&self, owner: &PublicKeyId) -> Result<Toc, OffchainError> {
        Toc::load(*owner, &self.toc_path(owner))
    }

    /// Appends an entry to the signer's own TOC. The content must already be
    /// in this store.
    pub fn toc_append(
        &self,
        signer: &Keypair,
        owner: &PublicKeyId,
        key: &str,
        content_hash: Hash256,
    ) -> Result<TocEntry, OffchainError> {
        if signer.public() != *owner {
            return Err(OffchainError::PermissionDenied(format!(
                "TOC {} belongs to another stakeholder",
                owner.short()
            )));
        }
        if !self.cas.contains(&content_hash) {
            return Err(OffchainError::NotFound(format!("record {content_hash}")));
        }
        let _guard = self.toc_lock.lock().unwrap_or_else(|e| e.into_inner());
        toc::append(&self.toc_path(owner), key, content_hash)
    }

    /// Stores `bytes` and lists them in the signer's TOC in one step.
    pub fn put_and_list(&self, signer: &Keypair, key: &str, bytes: &[u8]) -> Result<TocEntry, OffchainError> {
        let address = self.put_record(bytes)?;
        self.toc_append(signer, &signer.public(), key, address)
    }

    /// Computes the next anchor for the signer's TOC.
    pub fn anchor_draft(&self, owner: &PublicKeyId, anchored: u64) -> Result<AnchorDraft, OffchainError> {
        let toc = self.toc(owner)?;
        let length = toc.len() as u64;
        if length <= anchored {
            return Err(OffchainError::NoProgress { length, anchored });
        }
        Ok(AnchorDraft {
            toc_length: length,
            toc_root: toc.root(),
        })
    }

    /// Builds the signed `ANCHOR_TOC` transaction for the signer's TOC.
    pub fn anchor_toc(
        &self,
        signer: &Keypair,
        anchored: u64,
        nonce: u64,
        chain_id: u64,
    ) -> Result<(AnchorDraft, Transaction), OffchainError> {
        let draft = self.anchor_draft(&signer.public(), anchored)?;
        let tx = Transaction::sign(
            Payload::AnchorToc {
                toc_length: draft.toc_length,
                toc_root: draft.toc_root,
            },
            nonce,
            signer,
            chain_id,
        )
        .expect("anchor payload has no variable-length fields");
        Ok((draft, tx))
    }

    pub fn prove_membership(&self, owner: &PublicKeyId, index: u64, anchor: &TocAnchor) -> Result<MembershipProof, OffchainError> {
        prove_membership(self.toc(owner)?.entries(), index, anchor)
    }
}

#[cfg(test)]
mod tests;
