//! Blocking HTTP client for the node API.

use std::time::{Duration, Instant};

use rltrace_core::{Hash256, PublicKeyId, Transaction};
use serde::de::DeserializeOwned;

use crate::api::*;

/// Responses above this size are refused; a full audit of a large chain
/// can run to tens of megabytes.
const MAX_BODY: u64 = 512 << 20;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("cannot reach node: {0}")]
    Transport(String),
    #[error("{}: {}", .error.code.as_str(), .error.message)]
    Api { status: u16, height: u64, error: ApiError },
    #[error("unexpected response: {0}")]
    Decode(String),
    #[error("transaction {0} still pending after {1:?}")]
    Timeout(Hash256, Duration),
}

#[derive(Clone, Debug)]
pub struct Client {
    base: String,
    agent: ureq::Agent,
}

impl Client {
    pub fn new(base: impl Into<String>) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(300)))
            .build();
        Client {
            base: base.into().trim_end_matches('/').to_string(),
            agent: ureq::Agent::new_with_config(config),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    fn read<T: DeserializeOwned>(mut resp: ureq::http::Response<ureq::Body>) -> Result<T, ClientError> {
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .with_config()
            .limit(MAX_BODY)
            .read_to_string()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        if (200..300).contains(&status) {
            return serde_json::from_str(&text).map_err(|e| ClientError::Decode(e.to_string()));
        }
        match serde_json::from_str::<ErrorBody>(&text) {
            Ok(body) => Err(ClientError::Api {
                status,
                height: body.height,
                error: body.error,
            }),
            Err(_) => Err(ClientError::Decode(format!("HTTP {status}: {text}"))),
        }
    }

    pub fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, ClientError> {
        let resp = self
            .agent
            .get(format!("{}{path}", self.base))
            .call()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        Self::read(resp)
    }

    /// Rejections come back as a response with `accepted: false`.
    pub fn submit_hex(&self, tx_hex: &str) -> Result<SubmitResponse, ClientError> {
        let resp = self
            .agent
            .post(format!("{}/tx", self.base))
            .send_json(&SubmitRequest { tx: tx_hex.to_string() })
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let mut resp = resp;
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        if let Ok(r) = serde_json::from_str::<SubmitResponse>(&text) {
            return Ok(r);
        }
        match serde_json::from_str::<ErrorBody>(&text) {
            Ok(body) => Err(ClientError::Api {
                status,
                height: body.height,
                error: body.error,
            }),
            Err(_) => Err(ClientError::Decode(format!("HTTP {status}: {text}"))),
        }
    }

    pub fn submit(&self, tx: &Transaction) -> Result<SubmitResponse, ClientError> {
        let hex = tx.to_hex().map_err(|e| ClientError::Decode(e.to_string()))?;
        self.submit_hex(&hex)
    }

    pub fn tx_status(&self, hash: &Hash256) -> Result<TxStatusResponse, ClientError> {
        self.get(&format!("/tx/{hash}"))
    }

    /// Polls until the transaction leaves the pending pool.
    pub fn wait(&self, hash: &Hash256, timeout: Duration) -> Result<TxStatusResponse, ClientError> {
        let deadline = Instant::now() + timeout;
        loop {
            let st = self.tx_status(hash)?;
            if st.state != TxState::Pending {
                return Ok(st);
            }
            if Instant::now() >= deadline {
                return Err(ClientError::Timeout(*hash, timeout));
            }
            std::thread::sleep(Duration::from_millis(10));
        }
    }

    pub fn status(&self) -> Result<StatusResponse, ClientError> {
        self.get("/status")
    }

    pub fn nonce(&self, id: &PublicKeyId) -> Result<u64, ClientError> {
        self.get::<NonceResponse>(&format!("/nonce/{id}")).map(|r| r.last_nonce)
    }

    pub fn block(&self, height: u64) -> Result<BlockResponse, ClientError> {
        self.get(&format!("/block/{height}"))
    }

    pub fn history(&self, serial: &str) -> Result<HistoryResponse, ClientError> {
        self.get(&format!("/device/{}/history", encode_segment(serial)))
    }

    pub fn compliance(&self, serial: &str) -> Result<ComplianceResponse, ClientError> {
        self.get(&format!("/device/{}/compliance", encode_segment(serial)))
    }

    pub fn stats(&self, id: &PublicKeyId) -> Result<StatsResponse, ClientError> {
        self.get(&format!("/stakeholder/{id}/stats"))
    }

    pub fn record(&self, hash: &Hash256) -> Result<Vec<u8>, ClientError> {
        let r: RecordResponse = self.get(&format!("/record/{hash}"))?;
        hex::decode(&r.bytes).map_err(|e| ClientError::Decode(e.to_string()))
    }

    pub fn verify_chain(&self) -> Result<VerifyResponse, ClientError> {
        self.get("/verify-chain")
    }

    pub fn audit(&self) -> Result<AuditResponse, ClientError> {
        self.get("/audit")
    }

    pub fn metrics(&self) -> Result<MetricsResponse, ClientError> {
        self.get("/metrics")
    }

}

/// Percent-encodes everything outside the unreserved URL set.
fn encode_segment(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        if b.is_ascii_alphanumeric() || b"-._~".contains(&b) {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segments_are_escaped() {
        assert_eq!(encode_segment("SN-1.a_b~"), "SN-1.a_b~");
        assert_eq!(encode_segment("a/b c"), "a%2Fb%20c");
    }
}
