//! HTTP/JSON routes over [`Node`].

use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rltrace_core::audit::{self, AuditError};
use rltrace_core::offchain::OffchainError;
use rltrace_core::{ErrorCode, Hash256, PublicKeyId};

use crate::api::*;
use crate::service::Node;

pub fn router(node: Arc<Node>) -> Router {
    Router::new()
        .route("/tx", post(submit))
        .route("/tx/{hash}", get(tx_status))
        .route("/block/{height}", get(block))
        .route("/device/{serial}/history", get(history))
        .route("/device/{serial}/compliance", get(compliance))
        .route("/stakeholder/{id}/stats", get(stats))
        .route("/record/{hash}", get(record))
        .route("/verify-chain", get(verify_chain))
        .route("/audit", get(audit_all))
        .route("/status", get(status))
        .route("/nonce/{id}", get(nonce))
        .route("/metrics", get(metrics))
        .with_state(node)
}

pub struct Failure {
    status: StatusCode,
    body: ErrorBody,
}

impl Failure {
    fn new(height: u64, code: ErrorCode, message: impl Into<String>) -> Self {
        Failure {
            status: status_for(code),
            body: ErrorBody {
                height,
                error: ApiError {
                    code,
                    message: message.into(),
                },
            },
        }
    }

    fn internal(height: u64, message: impl std::fmt::Display) -> Response {
        let mut f = Failure::new(height, ErrorCode::IntegrityFailure, message.to_string());
        f.status = StatusCode::INTERNAL_SERVER_ERROR;
        f.into_response()
    }
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

fn status_for(code: ErrorCode) -> StatusCode {
    match code {
        ErrorCode::NotFound | ErrorCode::MissingRecord => StatusCode::NOT_FOUND,
        ErrorCode::PermissionDenied | ErrorCode::BadSignature => StatusCode::FORBIDDEN,
        ErrorCode::Serialization | ErrorCode::InvalidPayload | ErrorCode::TooLarge => StatusCode::BAD_REQUEST,
        ErrorCode::Scheduling => StatusCode::SERVICE_UNAVAILABLE,
        _ => StatusCode::CONFLICT,
    }
}

type Reply<T> = Result<Json<T>, Response>;

fn parse_hash(height: u64, s: &str) -> Result<Hash256, Response> {
    Hash256::from_hex(s).map_err(|e| Failure::new(height, ErrorCode::Serialization, format!("hash: {e}")).into_response())
}

fn parse_key(height: u64, s: &str) -> Result<PublicKeyId, Response> {
    PublicKeyId::from_hex(s)
        .map_err(|e| Failure::new(height, ErrorCode::Serialization, format!("stakeholder id: {e}")).into_response())
}

/// Runs CPU-heavy work off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, Response> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| Failure::internal(0, format!("worker failed: {e}")))
}

async fn submit(State(node): State<Arc<Node>>, body: Result<Json<SubmitRequest>, axum::extract::rejection::JsonRejection>) -> Response {
    let req = match body {
        Ok(Json(r)) => r,
        Err(e) => return Failure::new(node.height(), ErrorCode::Serialization, e.body_text()).into_response(),
    };
    let resp = node.submit(&req.tx);
    let status = match resp.code {
        None => StatusCode::OK,
        Some(code) => status_for(code),
    };
    (status, Json(resp)).into_response()
}

async fn tx_status(State(node): State<Arc<Node>>, Path(hash): Path<String>) -> Reply<TxStatusResponse> {
    let hash = parse_hash(node.height(), &hash)?;
    Ok(Json(node.tx_status(&hash)))
}

async fn block(State(node): State<Arc<Node>>, Path(height): Path<u64>) -> Reply<BlockResponse> {
    let chain = node.chain.read().unwrap();
    let tip = chain.ledger.height();
    let Some(b) = chain.ledger.block(height) else {
        return Err(Failure::new(tip, ErrorCode::NotFound, format!("no block at height {height}")).into_response());
    };
    let mut transactions = Vec::with_capacity(b.transactions.len());
    for tx in &b.transactions {
        transactions.push(TxView {
            hash: tx.hash().map_err(|e| Failure::internal(tip, e))?,
            hex: tx.to_hex().map_err(|e| Failure::internal(tip, e))?,
            tx: tx.clone(),
        });
    }
    let h = &b.header;
    Ok(Json(BlockResponse {
        height: tip,
        block: BlockView {
            height: h.height,
            hash: b.hash(),
            prev_hash: h.prev_hash,
            tx_merkle_root: h.tx_merkle_root,
            timestamp: h.timestamp,
            proposer: h.proposer,
            seal: h.seal,
            transactions,
        },
    }))
}

async fn history(State(node): State<Arc<Node>>, Path(serial): Path<String>) -> Reply<HistoryResponse> {
    let chain = node.chain.read().unwrap();
    let height = chain.ledger.height();
    let reg = chain.ledger.registry();
    match (reg.device(&serial), reg.get_device_history(&serial)) {
        (Some(device), Ok(events)) => Ok(Json(HistoryResponse {
            height,
            device: device.clone(),
            events: events.to_vec(),
        })),
        _ => Err(Failure::new(height, ErrorCode::NotFound, format!("unknown device {serial}")).into_response()),
    }
}

async fn compliance(State(node): State<Arc<Node>>, Path(serial): Path<String>) -> Reply<ComplianceResponse> {
    let n = node.clone();
    let (height, result) = blocking(move || {
        let (height, blocks) = n.blocks();
        (height, audit::audit_device(&blocks, n.genesis(), n.stores(), &serial))
    })
    .await?;
    match result {
        Ok(report) => Ok(Json(ComplianceResponse { height, report })),
        Err(e @ AuditError::UnknownDevice(_)) => Err(Failure::new(height, ErrorCode::NotFound, e.to_string()).into_response()),
    }
}

async fn audit_all(State(node): State<Arc<Node>>) -> Reply<AuditResponse> {
    let n = node.clone();
    let (height, report) = blocking(move || {
        let (height, blocks) = n.blocks();
        (height, audit::audit_all(&blocks, n.genesis(), n.stores()))
    })
    .await?;
    Ok(Json(AuditResponse { height, report }))
}

async fn stats(State(node): State<Arc<Node>>, Path(id): Path<String>) -> Reply<StatsResponse> {
    let chain = node.chain.read().unwrap();
    let height = chain.ledger.height();
    let id = parse_key(height, &id)?;
    chain
        .ledger
        .registry()
        .get_stakeholder_stats(&id)
        .map(|stats| Json(StatsResponse { height, stats }))
        .map_err(|e| Failure::new(height, e.code(), e.to_string()).into_response())
}

async fn record(State(node): State<Arc<Node>>, Path(hash): Path<String>) -> Reply<RecordResponse> {
    let height = node.height();
    let hash = parse_hash(height, &hash)?;
    let mut tampered = None;
    for store in node.stores() {
        match store.get_record(&hash) {
            Ok(bytes) => {
                return Ok(Json(RecordResponse {
                    height,
                    hash,
                    bytes: hex::encode(bytes),
                }))
            }
            Err(OffchainError::NotFound(_)) => {}
            Err(e) => tampered = Some(e),
        }
    }
    Err(match tampered {
        Some(e) => Failure::new(height, e.code().unwrap_or(ErrorCode::IntegrityFailure), e.to_string()),
        None => Failure::new(height, ErrorCode::NotFound, format!("no record {hash}")),
    }
    .into_response())
}

async fn verify_chain(State(node): State<Arc<Node>>) -> Reply<VerifyResponse> {
    let n = node.clone();
    match blocking(move || n.verify_stored()).await? {
        Ok((height, report)) => Ok(Json(VerifyResponse { height, report })),
        Err(e) => Err(Failure::internal(node.height(), e)),
    }
}

async fn status(State(node): State<Arc<Node>>) -> Json<StatusResponse> {
    let (height, tip, state_digest) = {
        let chain = node.chain.read().unwrap();
        (chain.ledger.height(), chain.ledger.tip().hash(), chain.ledger.state_digest())
    };
    Json(StatusResponse {
        height,
        chain_id: node.genesis().chain_id,
        tip,
        state_digest,
        validator: node.validator(),
        pending: node.pending(),
        halted: node.halted(),
    })
}

async fn nonce(State(node): State<Arc<Node>>, Path(id): Path<String>) -> Reply<NonceResponse> {
    let chain = node.chain.read().unwrap();
    let height = chain.ledger.height();
    let id = parse_key(height, &id)?;
    Ok(Json(NonceResponse {
        height,
        id,
        last_nonce: chain.ledger.last_nonce(&id),
    }))
}

async fn metrics(State(node): State<Arc<Node>>) -> Json<MetricsResponse> {
    Json(node.metrics())
}
