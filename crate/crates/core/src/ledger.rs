//! Committed ledger state and proof-of-authority block production.

use std::collections::BTreeMap;

use crate::block::{Block, BLOCK_VERSION};
use crate::codec::CodecError;
use crate::crypto::{Keypair, PublicKeyId};
use crate::error::ErrorCode;
use crate::genesis::GenesisConfig;
use crate::hash::Hash256;
use crate::registry::{ContractError, Registry};
use crate::tx::Transaction;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LedgerError {
    #[error("serialization: {0}")]
    Codec(#[from] CodecError),
    #[error("signature does not verify for this chain")]
    BadSignature,
    #[error("nonce {got} is not above last committed nonce {last}")]
    BadNonce { last: u64, got: u64 },
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error("{key} is not a genesis validator")]
    NotValidator { key: PublicKeyId },
    #[error("height {height} belongs to validator {expected}")]
    NotScheduled { height: u64, expected: PublicKeyId },
    #[error("block {height} rejected: {reason}")]
    InvalidBlock { height: u64, reason: String },
}

impl LedgerError {
    pub fn code(&self) -> ErrorCode {
        match self {
            LedgerError::Codec(_) => ErrorCode::Serialization,
            LedgerError::BadSignature => ErrorCode::BadSignature,
            LedgerError::BadNonce { .. } => ErrorCode::BadNonce,
            LedgerError::Contract(e) => e.code(),
            LedgerError::NotValidator { .. } | LedgerError::NotScheduled { .. } => ErrorCode::Scheduling,
            LedgerError::InvalidBlock { .. } => ErrorCode::InvalidPayload,
        }
    }
}

/// Registry plus per-sender nonces: everything transactions can change.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LedgerState {
    pub registry: Registry,
    nonces: BTreeMap<PublicKeyId, u64>,
}

impl LedgerState {
    pub fn new(genesis: &GenesisConfig) -> Self {
        LedgerState {
            registry: Registry::new(genesis.registrars.iter().copied()),
            nonces: BTreeMap::new(),
        }
    }

    pub fn last_nonce(&self, sender: &PublicKeyId) -> u64 {
        self.nonces.get(sender).copied().unwrap_or(0)
    }

    /// Signature and nonce checks that need no contract state.
    pub fn admit(&self, chain_id: u64, tx: &Transaction) -> Result<(), LedgerError> {
        if !tx.verify_signature(chain_id) {
            return Err(LedgerError::BadSignature);
        }
        let last = self.last_nonce(&tx.sender);
        if tx.nonce <= last {
            return Err(LedgerError::BadNonce { last, got: tx.nonce });
        }
        Ok(())
    }

    /// Applies one transaction atomically: on error nothing changes.
    pub fn apply_tx(&mut self, chain_id: u64, tx: &Transaction, height: u64) -> Result<(), LedgerError> {
        if !tx.verify_signature(chain_id) {
            return Err(LedgerError::BadSignature);
        }
        self.apply_presigned(tx, height)
    }

    /// [`Self::apply_tx`] for a transaction whose signature the caller has
    /// already verified.
    pub(crate) fn apply_presigned(&mut self, tx: &Transaction, height: u64) -> Result<(), LedgerError> {
        let last = self.last_nonce(&tx.sender);
        if tx.nonce <= last {
            return Err(LedgerError::BadNonce { last, got: tx.nonce });
        }
        self.registry.apply(&tx.sender, &tx.payload, height)?;
        self.nonces.insert(tx.sender, tx.nonce);
        Ok(())
    }

    /// Registry digest extended with the nonce table.
    pub fn digest(&self) -> Hash256 {
        let mut parts: Vec<u8> = self.registry.state_digest().0.to_vec();
        for (k, n) in &self.nonces {
            parts.extend_from_slice(&k.0);
            parts.extend_from_slice(&n.to_be_bytes());
        }
        Hash256::digest(&parts)
    }
}

/// Result of one sealing round.
#[derive(Debug)]
pub struct SealOutcome {
    /// `None` when nothing was included and empty blocks are disabled.
    pub block: Option<Block>,
    /// Indexes into the pending slice that made it into the block.
    pub included: Vec<usize>,
    /// Indexes into the pending slice that were skipped, with the reason.
    pub excluded: Vec<(usize, LedgerError)>,
}

#[derive(Clone, Debug)]
pub struct Ledger {
    genesis: GenesisConfig,
    blocks: Vec<Block>,
    state: LedgerState,
}

impl Ledger {
    pub fn new(genesis: GenesisConfig) -> Self {
        let state = LedgerState::new(&genesis);
        let blocks = vec![Block::genesis(&genesis)];
        Ledger {
            genesis,
            blocks,
            state,
        }
    }

    /// Rebuilds a ledger by importing every block after genesis.
    pub fn from_blocks(genesis: GenesisConfig, blocks: impl IntoIterator<Item = Block>) -> Result<Self, LedgerError> {
        let mut iter = blocks.into_iter();
        let mut ledger = Ledger::new(genesis);
        match iter.next() {
            None => return Ok(ledger),
            Some(first) if first == ledger.blocks[0] => {}
            Some(_) => {
                return Err(LedgerError::InvalidBlock {
                    height: 0,
                    reason: "genesis block does not match the genesis configuration".into(),
                })
            }
        }
        for block in iter {
            ledger.import_inner(block, false)?;
        }
        Ok(ledger)
    }

    pub fn genesis(&self) -> &GenesisConfig {
        &self.genesis
    }

    pub fn chain_id(&self) -> u64 {
        self.genesis.chain_id
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, height: u64) -> Option<&Block> {
        self.blocks.get(height as usize)
    }

    pub fn tip(&self) -> &Block {
        self.blocks.last().expect("ledger always holds genesis")
    }

    pub fn height(&self) -> u64 {
        self.tip().height()
    }

    pub fn state(&self) -> &LedgerState {
        &self.state
    }

    pub fn registry(&self) -> &Registry {
        &self.state.registry
    }

    pub fn last_nonce(&self, sender: &PublicKeyId) -> u64 {
        self.state.last_nonce(sender)
    }

    pub fn state_digest(&self) -> Hash256 {
        self.state.digest()
    }

    /// Cheap admission check against committed state.
    pub fn admit(&self, tx: &Transaction) -> Result<(), LedgerError> {
        tx.hash()?;
        self.state.admit(self.chain_id(), tx)
    }

    /// Whether `key` may seal the next block.
    pub fn check_turn(&self, key: &PublicKeyId) -> Result<(), LedgerError> {
        if !self.genesis.is_validator(key) {
            return Err(LedgerError::NotValidator { key: *key });
        }
        let height = self.height() + 1;
        let expected = self
            .genesis
            .scheduled_proposer(height)
            .expect("validator set is non-empty");
        if expected != *key {
            return Err(LedgerError::NotScheduled { height, expected });
        }
        Ok(())
    }

    /// Applies `pending` in order, skipping invalid transactions, and seals
    /// the survivors into the next block.
    pub fn seal_block(
        &mut self,
        pending: &[Transaction],
        sealer: &Keypair,
        now: u64,
        allow_empty: bool,
    ) -> Result<SealOutcome, LedgerError> {
        self.check_turn(&sealer.public())?;
        let height = self.height() + 1;
        let chain_id = self.chain_id();
        let mut included = Vec::new();
        let mut excluded = Vec::new();
        for (i, tx) in pending.iter().enumerate() {
            let res = tx
                .hash()
                .map_err(LedgerError::from)
                .and_then(|_| self.state.apply_tx(chain_id, tx, height));
            match res {
                Ok(()) => included.push(i),
                Err(e) => excluded.push((i, e)),
            }
        }
        if included.is_empty() && !allow_empty {
            return Ok(SealOutcome {
                block: None,
                included,
                excluded,
            });
        }
        let txs: Vec<Transaction> = included.iter().map(|&i| pending[i].clone()).collect();
        let timestamp = now.max(self.tip().header.timestamp);
        let block = Block::assemble(height, self.tip().hash(), timestamp, txs, sealer, chain_id)
            .expect("transactions were hashed before inclusion");
        self.blocks.push(block.clone());
        Ok(SealOutcome {
            block: Some(block),
            included,
            excluded,
        })
    }

    /// Validates and appends a block produced elsewhere. On error the
    /// ledger is unchanged.
    pub fn import_block(&mut self, block: Block) -> Result<(), LedgerError> {
        self.import_inner(block, true)
    }

    fn import_inner(&mut self, block: Block, rollback: bool) -> Result<(), LedgerError> {
        let height = self.height() + 1;
        let h = &block.header;
        let reject = |reason: String| LedgerError::InvalidBlock { height, reason };
        if h.version != BLOCK_VERSION {
            return Err(reject(format!("unsupported version {}", h.version)));
        }
        if h.height != height {
            return Err(reject(format!("height field is {}", h.height)));
        }
        if h.prev_hash != self.tip().hash() {
            return Err(reject("prev_hash does not match tip".into()));
        }
        if h.timestamp < self.tip().header.timestamp {
            return Err(reject("timestamp goes backwards".into()));
        }
        let expected = self.genesis.scheduled_proposer(height).expect("non-empty validators");
        if h.proposer != expected {
            return Err(reject(format!("proposer {} is not scheduled", h.proposer)));
        }
        if !h.verify_seal(self.chain_id()) {
            return Err(reject("seal does not verify".into()));
        }
        if block.compute_tx_root()? != h.tx_merkle_root {
            return Err(reject("tx_merkle_root mismatch".into()));
        }
        let checkpoint = rollback.then(|| self.state.clone());
        let chain_id = self.chain_id();
        for (i, tx) in block.transactions.iter().enumerate() {
            if let Err(e) = self.state.apply_tx(chain_id, tx, height) {
                if let Some(saved) = checkpoint {
                    self.state = saved;
                }
                return Err(reject(format!("transaction {i}: {e}")));
            }
        }
        self.blocks.push(block);
        Ok(())
    }
}
