//! Request and response bodies. Every response carries the committed
//! `height` it reflects; binary fields are hex.

use rltrace_core::audit::{CustodyReport, SystemReport};
use rltrace_core::registry::types::{DeviceRecord, ProcessEvent};
use rltrace_core::registry::StakeholderStats;
use rltrace_core::verify::ChainReport;
use rltrace_core::{ErrorCode, Hash256, PublicKeyId, Signature, Transaction};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubmitRequest {
    /// Canonical transaction bytes, hex.
    pub tx: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub height: u64,
    pub accepted: bool,
    pub tx_hash: Option<Hash256>,
    pub code: Option<ErrorCode>,
    pub reason: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxState {
    Pending,
    Committed,
    Excluded,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxStatusResponse {
    pub height: u64,
    pub tx_hash: Hash256,
    pub state: TxState,
    pub block_height: Option<u64>,
    pub code: Option<ErrorCode>,
    pub reason: Option<String>,
    /// Admission to commit, microseconds.
    pub commit_latency_us: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxView {
    pub hash: Hash256,
    pub hex: String,
    pub tx: Transaction,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockView {
    pub height: u64,
    pub hash: Hash256,
    pub prev_hash: Hash256,
    pub tx_merkle_root: Hash256,
    pub timestamp: u64,
    pub proposer: PublicKeyId,
    pub seal: Signature,
    pub transactions: Vec<TxView>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlockResponse {
    pub height: u64,
    pub block: BlockView,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HistoryResponse {
    pub height: u64,
    pub device: DeviceRecord,
    pub events: Vec<ProcessEvent>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComplianceResponse {
    pub height: u64,
    pub report: CustodyReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditResponse {
    pub height: u64,
    pub report: SystemReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StatsResponse {
    pub height: u64,
    pub stats: StakeholderStats,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecordResponse {
    pub height: u64,
    pub hash: Hash256,
    pub bytes: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyResponse {
    pub height: u64,
    pub report: ChainReport,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusResponse {
    pub height: u64,
    pub chain_id: u64,
    pub tip: Hash256,
    pub state_digest: Hash256,
    pub validator: Option<PublicKeyId>,
    pub pending: usize,
    /// Set when sealing stopped after a storage failure.
    pub halted: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NonceResponse {
    pub height: u64,
    pub id: PublicKeyId,
    pub last_nonce: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsResponse {
    pub height: u64,
    pub blocks_sealed: u64,
    pub txs_committed: u64,
    pub txs_excluded: u64,
    /// Signature, nonce and contract checks plus state update, per included tx.
    pub mean_apply_us: Option<f64>,
    pub median_commit_latency_us: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub height: u64,
    pub error: ApiError,
}
