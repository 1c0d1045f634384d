//! Reverse-logistics traceability on a permissioned, proof-of-authority
//! ledger.
//!
//! The crate is layered bottom-up:
//!
//! * [`hash`], [`crypto`], [`codec`], [`tx`], [`merkle`], [`block`],
//!   [`genesis`]: primitives and the canonical wire format.
//! * [`ledger`], [`verify`], [`store`]: the hash-chained block store,
//!   sealing, independent chain verification and the on-disk block log.
//! * [`registry`]: the stakeholder, product and process contracts.
//! * [`offchain`]: content-addressed record storage and per-stakeholder
//!   tables of contents anchored on-chain.
//! * [`audit`]: chain-of-custody reconstruction and compliance checks
//!   computed from raw blocks and off-chain stores.

pub mod audit;
pub mod block;
pub mod codec;
pub mod crypto;
pub mod error;
pub mod genesis;
pub mod hash;
pub mod ledger;
pub mod merkle;
pub mod offchain;
pub mod registry;
pub mod scenario;
pub mod store;
pub mod tx;
pub mod verify;

pub use block::{Block, BlockHeader};
pub use crypto::{Keypair, PublicKeyId, Signature};
pub use error::ErrorCode;
pub use genesis::GenesisConfig;
pub use hash::Hash256;
pub use ledger::{Ledger, LedgerError};
pub use registry::Registry;
pub use tx::{EventPayload, Payload, Transaction};
