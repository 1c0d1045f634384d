//! Blocks and headers.
//!
//! A header is `version:u32 | height:u64 | prev_hash | tx_merkle_root |
//! timestamp:u64 | proposer | seal`. The seal is the proposer's signature
//! over a chain-specific preamble and every header field before it. The
//! header hash covers the seal too. A block appends `tx_count:u32` and each
//! transaction as a `u32` length followed by its canonical bytes.

use serde::{Deserialize, Serialize};

use crate::codec::{CodecError, Reader, Writer};
use crate::crypto::{Keypair, PublicKeyId, Signature};
use crate::genesis::GenesisConfig;
use crate::hash::Hash256;
use crate::merkle::merkle_root;
use crate::tx::Transaction;

pub const BLOCK_VERSION: u32 = 1;
const SEAL_DOMAIN: &[u8] = b"rltrace/block/v1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockHeader {
    pub version: u32,
    pub height: u64,
    pub prev_hash: Hash256,
    pub tx_merkle_root: Hash256,
    pub timestamp: u64,
    pub proposer: PublicKeyId,
    pub seal: Signature,
}

impl BlockHeader {
    fn write_unsealed(&self, w: &mut Writer) {
        w.u32(self.version)
            .u64(self.height)
            .hash(&self.prev_hash)
            .hash(&self.tx_merkle_root)
            .u64(self.timestamp)
            .key(&self.proposer);
    }

    pub fn seal_message(&self, chain_id: u64) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(SEAL_DOMAIN).u64(chain_id);
        self.write_unsealed(&mut w);
        w.into_bytes()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.write_unsealed(&mut w);
        w.signature(&self.seal);
        w.into_bytes()
    }

    pub fn hash(&self) -> Hash256 {
        Hash256::digest(&self.encode())
    }

    pub fn verify_seal(&self, chain_id: u64) -> bool {
        self.proposer.verify(&self.seal_message(chain_id), &self.seal)
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(BlockHeader {
            version: r.u32("version")?,
            height: r.u64("height")?,
            prev_hash: r.hash("prev_hash")?,
            tx_merkle_root: r.hash("tx_merkle_root")?,
            timestamp: r.u64("timestamp")?,
            proposer: r.key("proposer")?,
            seal: r.signature("seal")?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub header: BlockHeader,
    pub transactions: Vec<Transaction>,
}

impl Block {
    /// Block 0. Carries no transactions, a zero proposer and a zero seal.
    pub fn genesis(config: &GenesisConfig) -> Block {
        Block {
            header: BlockHeader {
                version: BLOCK_VERSION,
                height: 0,
                prev_hash: Hash256::ZERO,
                tx_merkle_root: merkle_root(&[]),
                timestamp: config.genesis_time,
                proposer: PublicKeyId::ZERO,
                seal: Signature::ZERO,
            },
            transactions: Vec::new(),
        }
    }

    /// Builds and seals a block without validating its transactions.
    pub fn assemble(
        height: u64,
        prev_hash: Hash256,
        timestamp: u64,
        transactions: Vec<Transaction>,
        sealer: &Keypair,
        chain_id: u64,
    ) -> Result<Block, CodecError> {
        let tx_merkle_root = tx_root(&transactions)?;
        let mut header = BlockHeader {
            version: BLOCK_VERSION,
            height,
            prev_hash,
            tx_merkle_root,
            timestamp,
            proposer: sealer.public(),
            seal: Signature::ZERO,
        };
        header.seal = sealer.sign(&header.seal_message(chain_id));
        Ok(Block {
            header,
            transactions,
        })
    }

    pub fn hash(&self) -> Hash256 {
        self.header.hash()
    }

    pub fn height(&self) -> u64 {
        self.header.height
    }

    pub fn compute_tx_root(&self) -> Result<Hash256, CodecError> {
        tx_root(&self.transactions)
    }

    pub fn encode(&self) -> Result<Vec<u8>, CodecError> {
        let mut w = Writer::new();
        w.raw(&self.header.encode()).u32(self.transactions.len() as u32);
        for tx in &self.transactions {
            let bytes = tx.canonical_bytes()?;
            w.u32(bytes.len() as u32).raw(&bytes);
        }
        Ok(w.into_bytes())
    }

    pub fn decode(bytes: &[u8]) -> Result<Block, CodecError> {
        let mut r = Reader::new(bytes);
        let header = BlockHeader::decode(&mut r)?;
        let count = r.u32("tx_count")? as usize;
        if count > r.remaining() / 4 {
            return Err(CodecError::Truncated("transactions"));
        }
        let mut transactions = Vec::with_capacity(count);
        for _ in 0..count {
            let len = r.u32("tx_len")? as usize;
            if len > r.remaining() {
                return Err(CodecError::Truncated("tx"));
            }
            let start = r.position();
            let tx = Transaction::decode_from(&mut r)?;
            if r.position() - start != len {
                return Err(CodecError::Schema(format!(
                    "transaction length prefix {len} does not match encoded length {}",
                    r.position() - start
                )));
            }
            transactions.push(tx);
        }
        r.finish()?;
        Ok(Block {
            header,
            transactions,
        })
    }
}

pub fn tx_root(transactions: &[Transaction]) -> Result<Hash256, CodecError> {
    let leaves = transactions
        .iter()
        .map(Transaction::hash)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(merkle_root(&leaves))
}
