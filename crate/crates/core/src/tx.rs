//! Signed transactions and their canonical encoding.
//!
//! Layout: `tag:u8 | payload fields | nonce:u64 | sender:[32] | signature:[64]`.
//! The signature covers a chain-specific preamble followed by every byte
//! before the signature, so a transaction signed for one chain id never
//! verifies on another.

use serde::{Deserialize, Serialize};

use crate::codec::{CodecError, Reader, Writer};
use crate::crypto::{Keypair, PublicKeyId, Signature};
use crate::hash::Hash256;
use crate::registry::types::{
    Classification, ComponentSpec, ComponentType, EventType, Replacement, Role, TestResult,
};

const SIGNING_DOMAIN: &[u8] = b"rltrace/tx/v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TxType {
    RegisterStakeholder = 1,
    RegisterDevice = 2,
    RecordEvent = 3,
    AnchorToc = 4,
    SetStakeholderActive = 5,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventPayload {
    pub event_type: EventType,
    pub device_serial: String,
    pub counterparty: Option<PublicKeyId>,
    pub result: TestResult,
    pub detail_hash: Hash256,
    /// `NONE` unless `event_type` is `CLASSIFICATION`.
    pub classification: Classification,
    /// Present only for `COMPONENT_REPLACEMENT`.
    pub replacement: Option<Replacement>,
}

impl EventPayload {
    /// A bare event with no counterparty, classification or replacement.
    pub fn new(event_type: EventType, device_serial: impl Into<String>, detail_hash: Hash256) -> Self {
        EventPayload {
            event_type,
            device_serial: device_serial.into(),
            counterparty: None,
            result: TestResult::Na,
            detail_hash,
            classification: Classification::None,
            replacement: None,
        }
    }

    pub fn with_counterparty(mut self, who: PublicKeyId) -> Self {
        self.counterparty = Some(who);
        self
    }

    pub fn with_result(mut self, result: TestResult) -> Self {
        self.result = result;
        self
    }

    pub fn with_classification(mut self, c: Classification) -> Self {
        self.classification = c;
        self
    }

    pub fn with_replacement(mut self, r: Replacement) -> Self {
        self.replacement = Some(r);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Payload {
    RegisterStakeholder {
        candidate: PublicKeyId,
        role: Role,
        display_name: String,
    },
    RegisterDevice {
        serial: String,
        model: String,
        original_manufacturer: PublicKeyId,
        components: Vec<ComponentSpec>,
    },
    RecordEvent(EventPayload),
    AnchorToc {
        toc_length: u64,
        toc_root: Hash256,
    },
    SetStakeholderActive {
        stakeholder: PublicKeyId,
        active: bool,
    },
}

impl Payload {
    pub fn tx_type(&self) -> TxType {
        match self {
            Payload::RegisterStakeholder { .. } => TxType::RegisterStakeholder,
            Payload::RegisterDevice { .. } => TxType::RegisterDevice,
            Payload::RecordEvent(_) => TxType::RecordEvent,
            Payload::AnchorToc { .. } => TxType::AnchorToc,
            Payload::SetStakeholderActive { .. } => TxType::SetStakeholderActive,
        }
    }

    fn encode(&self, w: &mut Writer) -> Result<(), CodecError> {
        w.u8(self.tx_type() as u8);
        match self {
            Payload::RegisterStakeholder {
                candidate,
                role,
                display_name,
            } => {
                w.key(candidate).u8(role.tag()).text("display_name", display_name)?;
            }
            Payload::RegisterDevice {
                serial,
                model,
                original_manufacturer,
                components,
            } => {
                w.text("serial", serial)?
                    .text("model", model)?
                    .key(original_manufacturer)
                    .u32(components.len() as u32);
                for c in components {
                    encode_component(w, c)?;
                }
            }
            Payload::RecordEvent(ev) => {
                w.u8(ev.event_type.tag())
                    .text("device_serial", &ev.device_serial)?
                    .opt_key(ev.counterparty.as_ref())
                    .u8(ev.result.tag())
                    .hash(&ev.detail_hash)
                    .u8(ev.classification.tag());
                match &ev.replacement {
                    None => {
                        w.u8(0);
                    }
                    Some(r) => {
                        w.u8(1).text("removed_serial", &r.removed_serial)?;
                        encode_component(w, &r.installed)?;
                    }
                }
            }
            Payload::AnchorToc {
                toc_length,
                toc_root,
            } => {
                w.u64(*toc_length).hash(toc_root);
            }
            Payload::SetStakeholderActive {
                stakeholder,
                active,
            } => {
                w.key(stakeholder).u8(u8::from(*active));
            }
        }
        Ok(())
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        let tag = r.u8("tx_type")?;
        let payload = match tag {
            1 => Payload::RegisterStakeholder {
                candidate: r.key("candidate")?,
                role: enum_field(r, "role", Role::from_tag)?,
                display_name: r.text("display_name")?,
            },
            2 => {
                let serial = r.text("serial")?;
                let model = r.text("model")?;
                let original_manufacturer = r.key("original_manufacturer")?;
                let count = r.u32("component_count")? as usize;
                // each component needs at least 1 + 4 + 32 bytes
                if count > r.remaining() / 37 {
                    return Err(CodecError::Truncated("components"));
                }
                let mut components = Vec::with_capacity(count);
                for _ in 0..count {
                    components.push(decode_component(r)?);
                }
                Payload::RegisterDevice {
                    serial,
                    model,
                    original_manufacturer,
                    components,
                }
            }
            3 => {
                let event_type = enum_field(r, "event_type", EventType::from_tag)?;
                let device_serial = r.text("device_serial")?;
                let counterparty = r.opt_key("counterparty")?;
                let result = enum_field(r, "result", TestResult::from_tag)?;
                let detail_hash = r.hash("detail_hash")?;
                let classification = enum_field(r, "classification", Classification::from_tag)?;
                let replacement = if r.flag("replacement")? {
                    let removed_serial = r.text("removed_serial")?;
                    Some(Replacement {
                        removed_serial,
                        installed: decode_component(r)?,
                    })
                } else {
                    None
                };
                Payload::RecordEvent(EventPayload {
                    event_type,
                    device_serial,
                    counterparty,
                    result,
                    detail_hash,
                    classification,
                    replacement,
                })
            }
            4 => Payload::AnchorToc {
                toc_length: r.u64("toc_length")?,
                toc_root: r.hash("toc_root")?,
            },
            5 => Payload::SetStakeholderActive {
                stakeholder: r.key("stakeholder")?,
                active: r.flag("active")?,
            },
            tag => return Err(CodecError::InvalidTag { field: "tx_type", tag }),
        };
        Ok(payload)
    }
}

fn encode_component(w: &mut Writer, c: &ComponentSpec) -> Result<(), CodecError> {
    w.u8(c.component_type.tag())
        .text("component_serial", &c.serial)?
        .hash(&c.feature_info_hash);
    Ok(())
}

fn decode_component(r: &mut Reader<'_>) -> Result<ComponentSpec, CodecError> {
    Ok(ComponentSpec {
        component_type: enum_field(r, "component_type", ComponentType::from_tag)?,
        serial: r.text("component_serial")?,
        feature_info_hash: r.hash("feature_info_hash")?,
    })
}

fn enum_field<T>(
    r: &mut Reader<'_>,
    field: &'static str,
    from_tag: fn(u8) -> Option<T>,
) -> Result<T, CodecError> {
    let tag = r.u8(field)?;
    from_tag(tag).ok_or(CodecError::InvalidTag { field, tag })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub payload: Payload,
    pub nonce: u64,
    pub sender: PublicKeyId,
    pub signature: Signature,
}

impl Transaction {
    /// Builds and signs a transaction for `chain_id`.
    pub fn sign(payload: Payload, nonce: u64, keypair: &Keypair, chain_id: u64) -> Result<Self, CodecError> {
        let mut tx = Transaction {
            payload,
            nonce,
            sender: keypair.public(),
            signature: Signature::ZERO,
        };
        let message = tx.signing_message(chain_id)?;
        tx.signature = keypair.sign(&message);
        Ok(tx)
    }

    pub fn tx_type(&self) -> TxType {
        self.payload.tx_type()
    }

    fn encode_unsigned(&self) -> Result<Writer, CodecError> {
        let mut w = Writer::new();
        self.payload.encode(&mut w)?;
        w.u64(self.nonce).key(&self.sender);
        Ok(w)
    }

    /// Bytes covered by the signature: domain tag, chain id, unsigned body.
    pub fn signing_message(&self, chain_id: u64) -> Result<Vec<u8>, CodecError> {
        let body = self.encode_unsigned()?.into_bytes();
        let mut msg = Vec::with_capacity(SIGNING_DOMAIN.len() + 8 + body.len());
        msg.extend_from_slice(SIGNING_DOMAIN);
        msg.extend_from_slice(&chain_id.to_be_bytes());
        msg.extend_from_slice(&body);
        Ok(msg)
    }

    pub fn canonical_bytes(&self) -> Result<Vec<u8>, CodecError> {
        let mut w = self.encode_unsigned()?;
        w.signature(&self.signature);
        Ok(w.into_bytes())
    }

    pub fn from_canonical_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(bytes);
        let tx = Self::decode_from(&mut r)?;
        r.finish()?;
        Ok(tx)
    }

    pub(crate) fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(Transaction {
            payload: Payload::decode(r)?,
            nonce: r.u64("nonce")?,
            sender: r.key("sender")?,
            signature: r.signature("signature")?,
        })
    }

    /// SHA-256 over the full canonical encoding, signature included.
    pub fn hash(&self) -> Result<Hash256, CodecError> {
        Ok(Hash256::digest(&self.canonical_bytes()?))
    }

    pub fn verify_signature(&self, chain_id: u64) -> bool {
        match self.signing_message(chain_id) {
            Ok(msg) => self.sender.verify(&msg, &self.signature),
            Err(_) => false,
        }
    }

    pub fn to_hex(&self) -> Result<String, CodecError> {
        self.canonical_bytes().map(hex::encode)
    }

    pub fn from_hex(s: &str) -> Result<Self, TxHexError> {
        let bytes = hex::decode(s.trim()).map_err(|e| TxHexError::Hex(e.to_string()))?;
        Ok(Self::from_canonical_bytes(&bytes)?)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TxHexError {
    #[error("invalid hex: {0}")]
    Hex(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Free-function form of [`Transaction::canonical_bytes`].
pub fn canonical_serialize(tx: &Transaction) -> Result<Vec<u8>, CodecError> {
    tx.canonical_bytes()
}

pub fn tx_hash(tx: &Transaction) -> Result<Hash256, CodecError> {
    tx.hash()
}
