//! Independent chain verification.
//!
//! Every failure becomes an entry in the report; nothing here returns an
//! error. Verification works on decoded blocks or on raw persisted bytes,
//! in which case an undecodable block is itself a reported failure.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::block::{Block, BLOCK_VERSION};
use crate::crypto::{PublicKeyId, Signature};
use crate::genesis::GenesisConfig;
use crate::hash::Hash256;
use crate::ledger::{LedgerError, LedgerState};

/// Remembers (key, signature, message) triples that verified.
///
/// Re-verifying a chain that is mostly unchanged then costs hashing only.
/// Only successes are stored, keyed by SHA-256 over the whole triple.
#[derive(Debug, Default)]
pub struct SigCache {
    verified: HashSet<Hash256>,
}

impl SigCache {
    const MAX_ENTRIES: usize = 1 << 20;

    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.verified.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verified.is_empty()
    }

    pub fn verify(&mut self, key: &PublicKeyId, message: &[u8], signature: &Signature) -> bool {
        let id = Hash256::digest_parts(&[&key.0, &signature.0, message]);
        if self.verified.contains(&id) {
            return true;
        }
        let ok = key.verify(message, signature);
        if ok {
            if self.verified.len() >= Self::MAX_ENTRIES {
                self.verified.clear();
            }
            self.verified.insert(id);
        }
        ok
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Decode,
    Genesis,
    Version,
    Height,
    HashLink,
    MerkleRoot,
    Seal,
    ProposerEligibility,
    Timestamp,
    TxSignature,
    TxApply,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Could not be evaluated because an earlier block was undecodable.
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub kind: CheckKind,
    pub status: Status,
    /// Transaction index for per-transaction checks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tx_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockReport {
    /// Position in the verified sequence.
    pub index: u64,
    pub hash: Option<Hash256>,
    pub tx_count: usize,
    pub checks: Vec<Check>,
}

impl BlockReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status == Status::Fail)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainReport {
    pub chain_id: u64,
    pub blocks: Vec<BlockReport>,
    pub valid: bool,
}

impl ChainReport {
    /// Indexes of blocks with at least one failed check.
    pub fn failed_blocks(&self) -> Vec<u64> {
        self.blocks.iter().filter(|b| !b.passed()).map(|b| b.index).collect()
    }

    pub fn failure_count(&self) -> usize {
        self.blocks.iter().map(|b| b.failures().count()).sum()
    }
}

impl fmt::Display for ChainReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "chain {}: {} blocks, {}",
            self.chain_id,
            self.blocks.len(),
            if self.valid { "VALID" } else { "INVALID" }
        )?;
        for b in &self.blocks {
            for c in b.failures() {
                write!(f, "  block {}: {:?} failed", b.index, c.kind)?;
                if let Some(i) = c.tx_index {
                    write!(f, " (tx {i})")?;
                }
                if let Some(d) = &c.detail {
                    write!(f, ": {d}")?;
                }
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

struct Verifier<'a> {
    genesis: &'a GenesisConfig,
    sigs: &'a mut SigCache,
    state: LedgerState,
    prev: Option<(Hash256, u64)>,
    reports: Vec<BlockReport>,
}

fn check(kind: CheckKind, ok: bool, detail: impl FnOnce() -> String) -> Check {
    Check {
        kind,
        status: if ok { Status::Pass } else { Status::Fail },
        tx_index: None,
        detail: (!ok).then(detail),
    }
}

impl<'a> Verifier<'a> {
    fn new(genesis: &'a GenesisConfig, sigs: &'a mut SigCache) -> Self {
        Verifier {
            genesis,
            sigs,
            state: LedgerState::new(genesis),
            prev: None,
            reports: Vec::new(),
        }
    }

    fn undecodable(&mut self, reason: String) {
        let index = self.reports.len() as u64;
        self.reports.push(BlockReport {
            index,
            hash: None,
            tx_count: 0,
            checks: vec![Check {
                kind: CheckKind::Decode,
                status: Status::Fail,
                tx_index: None,
                detail: Some(reason),
            }],
        });
        self.prev = None;
    }

    fn block(&mut self, block: &Block) {
        let index = self.reports.len() as u64;
        let h = &block.header;
        let hash = block.hash();
        let chain_id = self.genesis.chain_id;
        let mut checks = Vec::new();

        if index == 0 {
            let expected = Block::genesis(self.genesis);
            checks.push(check(CheckKind::Genesis, *block == expected, || {
                "block 0 differs from the configured genesis block".into()
            }));
        } else {
            checks.push(check(CheckKind::Version, h.version == BLOCK_VERSION, || {
                format!("version {}", h.version)
            }));
            checks.push(check(CheckKind::Height, h.height == index, || {
                format!("height field {} at position {index}", h.height)
            }));
            match self.prev {
                Some((prev_hash, prev_ts)) => {
                    checks.push(check(CheckKind::HashLink, h.prev_hash == prev_hash, || {
                        "prev_hash does not match the previous header hash".into()
                    }));
                    checks.push(check(CheckKind::Timestamp, h.timestamp >= prev_ts, || {
                        format!("timestamp {} before previous {prev_ts}", h.timestamp)
                    }));
                }
                None => {
                    for kind in [CheckKind::HashLink, CheckKind::Timestamp] {
                        checks.push(Check {
                            kind,
                            status: Status::Skipped,
                            tx_index: None,
                            detail: Some("previous block undecodable".into()),
                        });
                    }
                }
            }
            let root_ok = block.compute_tx_root().is_ok_and(|r| r == h.tx_merkle_root);
            checks.push(check(CheckKind::MerkleRoot, root_ok, || "tx_merkle_root mismatch".into()));
            let seal_ok = self.sigs.verify(&h.proposer, &h.seal_message(chain_id), &h.seal);
            checks.push(check(CheckKind::Seal, seal_ok, || {
                "seal does not verify under the proposer key".into()
            }));
            let eligible = self.genesis.scheduled_proposer(index) == Some(h.proposer);
            checks.push(check(CheckKind::ProposerEligibility, eligible, || {
                if self.genesis.is_validator(&h.proposer) {
                    format!("validator {} sealed out of turn", h.proposer.short())
                } else {
                    format!("{} is not a genesis validator", h.proposer.short())
                }
            }));
            let mut sig_ok = Vec::with_capacity(block.transactions.len());
            for (i, tx) in block.transactions.iter().enumerate() {
                let ok = tx
                    .signing_message(chain_id)
                    .is_ok_and(|m| self.sigs.verify(&tx.sender, &m, &tx.signature));
                let mut c = check(CheckKind::TxSignature, ok, || "signature does not verify".into());
                c.tx_index = Some(i);
                checks.push(c);
                sig_ok.push(ok);
            }
            for (i, tx) in block.transactions.iter().enumerate() {
                let res = if sig_ok[i] {
                    self.state.apply_presigned(tx, index)
                } else {
                    Err(LedgerError::BadSignature)
                };
                if let Err(e) = res {
                    checks.push(Check {
                        kind: CheckKind::TxApply,
                        status: Status::Fail,
                        tx_index: Some(i),
                        detail: Some(e.to_string()),
                    });
                }
            }
        }

        self.prev = Some((hash, h.timestamp));
        self.reports.push(BlockReport {
            index,
            hash: Some(hash),
            tx_count: block.transactions.len(),
            checks,
        });
    }

    fn finish(self) -> ChainReport {
        let valid = !self.reports.is_empty() && self.reports.iter().all(BlockReport::passed);
        ChainReport {
            chain_id: self.genesis.chain_id,
            blocks: self.reports,
            valid,
        }
    }
}

/// Verifies decoded blocks, starting at genesis.
pub fn verify_chain(chain: &[Block], genesis: &GenesisConfig) -> ChainReport {
    verify_chain_cached(chain, genesis, &mut SigCache::new())
}

pub fn verify_chain_cached(chain: &[Block], genesis: &GenesisConfig, sigs: &mut SigCache) -> ChainReport {
    let mut v = Verifier::new(genesis, sigs);
    for block in chain {
        v.block(block);
    }
    v.finish()
}

/// Verifies raw block encodings as read from disk.
pub fn verify_encoded<B: AsRef<[u8]>>(chain: &[B], genesis: &GenesisConfig) -> ChainReport {
    verify_encoded_cached(chain, genesis, &mut SigCache::new())
}

pub fn verify_encoded_cached<B: AsRef<[u8]>>(chain: &[B], genesis: &GenesisConfig, sigs: &mut SigCache) -> ChainReport {
    let mut v = Verifier::new(genesis, sigs);
    for raw in chain {
        match Block::decode(raw.as_ref()) {
            Ok(block) => v.block(&block),
            Err(e) => v.undecodable(e.to_string()),
        }
    }
    v.finish()
}
