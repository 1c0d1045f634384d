//! Chain-of-custody reconstruction and compliance auditing.
//!
//! The auditor trusts nothing it is handed. It replays raw blocks into a
//! fresh [`Registry`], re-checks every transaction signature and every
//! contract rule, and resolves each event's off-chain record through the
//! actor's anchored table of contents. Rule violations are recorded as
//! findings and the event is still applied, so one bad step does not hide
//! the rest of the history.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::block::Block;
use crate::crypto::PublicKeyId;
use crate::genesis::GenesisConfig;
use crate::hash::Hash256;
use crate::offchain::{self, OffchainError, OffchainStore, TocEntry};
use crate::registry::types::{
    Classification, DeviceState, Disposition, EventType, ProcessEvent, Role, TestResult, TocAnchor,
};
use crate::registry::{ContractError, Denial, Registry, TransitionError};
use crate::tx::Payload;
use crate::verify::{self, ChainReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FindingCode {
    MissingWipe,
    BrokenCustody,
    BadSignature,
    UnanchoredRecord,
    UnresolvableRecord,
    LifecycleViolation,
    ClassificationMismatch,
}

impl FindingCode {
    pub fn as_str(self) -> &'static str {
        match self {
            FindingCode::MissingWipe => "MISSING_WIPE",
            FindingCode::BrokenCustody => "BROKEN_CUSTODY",
            FindingCode::BadSignature => "BAD_SIGNATURE",
            FindingCode::UnanchoredRecord => "UNANCHORED_RECORD",
            FindingCode::UnresolvableRecord => "UNRESOLVABLE_RECORD",
            FindingCode::LifecycleViolation => "LIFECYCLE_VIOLATION",
            FindingCode::ClassificationMismatch => "CLASSIFICATION_MISMATCH",
        }
    }
}

impl fmt::Display for FindingCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Compliant,
    NonCompliant,
    /// Only missing off-chain data stands in the way of a verdict.
    Indeterminate,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Compliant => "COMPLIANT",
            Verdict::NonCompliant => "NON_COMPLIANT",
            Verdict::Indeterminate => "INDETERMINATE",
        }
    }

    fn from_findings(findings: &[Finding]) -> Verdict {
        if findings.is_empty() {
            Verdict::Compliant
        } else if findings.iter().all(|f| f.code == FindingCode::UnresolvableRecord) {
            Verdict::Indeterminate
        } else {
            Verdict::NonCompliant
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub code: FindingCode,
    /// Event sequence number within the device history, if event-specific.
    pub seq: Option<u64>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RecordStatus {
    Resolved { bytes: usize },
    Missing,
    Tampered { detail: String },
    NoRecord,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TocStatus {
    /// Entry proven against the actor's latest on-chain anchor.
    Anchored { index: u64, anchor_length: u64 },
    /// No store holds the actor's TOC.
    Unavailable,
    /// The actor's TOC does not list this record.
    NotListed,
    /// Listed, but after the anchored prefix or with no anchor at all.
    NotAnchored { index: u64, anchor_length: u64 },
    /// The local TOC does not hash to the on-chain root.
    RootMismatch,
    Unreadable { detail: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditedEvent {
    pub seq: u64,
    pub event_type: EventType,
    pub actor: PublicKeyId,
    pub actor_role: Option<Role>,
    pub counterparty: Option<PublicKeyId>,
    pub result: TestResult,
    pub classification: Classification,
    pub block_height: u64,
    pub tx_hash: Hash256,
    pub detail_hash: Hash256,
    pub signature_valid: bool,
    /// Contract rule outcome when re-checked at this point in the replay.
    pub rule_error: Option<String>,
    pub record: RecordStatus,
    pub toc: TocStatus,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CustodySpan {
    pub custodian: PublicKeyId,
    pub custodian_role: Option<Role>,
    /// First event of the span; `None` means since registration.
    pub from_seq: Option<u64>,
    /// Event that ended the span; `None` means current custodian.
    pub to_seq: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CustodyReport {
    pub device_serial: String,
    pub model: String,
    pub original_manufacturer: PublicKeyId,
    pub registered_at: u64,
    pub state: DeviceState,
    pub classification: Classification,
    pub disposition: Disposition,
    pub events: Vec<AuditedEvent>,
    pub custody_timeline: Vec<CustodySpan>,
    pub findings: Vec<Finding>,
    pub verdict: Verdict,
}

impl CustodyReport {
    pub fn is_compliant(&self) -> bool {
        self.verdict == Verdict::Compliant && self.findings.is_empty()
    }

    pub fn finding_codes(&self) -> Vec<FindingCode> {
        self.findings.iter().map(|f| f.code).collect()
    }

    /// Plain-text table for terminals.
    pub fn render_text(&self) -> String {
        use fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "device {} ({})", self.device_serial, self.model);
        let _ = writeln!(
            s,
            "state {}  classification {}  disposition {}",
            self.state, self.classification, self.disposition
        );
        let _ = writeln!(s, "{:>4}  {:>6}  {:<28} {:<10} {:<4} {:<9} {}", "seq", "height", "event", "actor", "sig", "record", "toc");
        for e in &self.events {
            let record = match &e.record {
                RecordStatus::Resolved { .. } => "ok",
                RecordStatus::Missing => "missing",
                RecordStatus::Tampered { .. } => "tampered",
                RecordStatus::NoRecord => "none",
            };
            let toc = match &e.toc {
                TocStatus::Anchored { .. } => "anchored",
                TocStatus::Unavailable => "unavailable",
                TocStatus::NotListed => "not-listed",
                TocStatus::NotAnchored { .. } => "not-anchored",
                TocStatus::RootMismatch => "root-mismatch",
                TocStatus::Unreadable { .. } => "unreadable",
            };
            let _ = writeln!(
                s,
                "{:>4}  {:>6}  {:<28} {:<10} {:<4} {:<9} {}",
                e.seq,
                e.block_height,
                e.event_type.as_str(),
                e.actor.short(),
                if e.signature_valid { "ok" } else { "BAD" },
                record,
                toc
            );
        }
        let _ = writeln!(s, "custody:");
        for span in &self.custody_timeline {
            let from = span.from_seq.map_or("registration".to_string(), |q| format!("seq {q}"));
            let to = span.to_seq.map_or("now".to_string(), |q| format!("seq {q}"));
            let role = span.custodian_role.map_or("unregistered", |r| r.as_str());
            let _ = writeln!(s, "  {} [{role}] {from} -> {to}", span.custodian.short());
        }
        for f in &self.findings {
            let at = f.seq.map_or(String::new(), |q| format!(" at seq {q}"));
            let _ = writeln!(s, "finding {}{at}: {}", f.code, f.detail);
        }
        let _ = writeln!(s, "verdict {}", self.verdict);
        s
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorStatus {
    Verified,
    RootMismatch,
    TocTooShort,
    TocUnavailable,
    TocUnreadable,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorCheck {
    pub anchor: TocAnchor,
    pub status: AnchorStatus,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemReport {
    pub chain: ChainReport,
    pub devices: Vec<CustodyReport>,
    pub anchors: Vec<AnchorCheck>,
    pub compliant: bool,
}

impl SystemReport {
    pub fn render_text(&self) -> String {
        use fmt::Write;
        let mut s = self.chain.to_string();
        for a in &self.anchors {
            let _ = writeln!(
                s,
                "anchor {} len {} at height {}: {:?}",
                a.anchor.stakeholder.short(),
                a.anchor.toc_length,
                a.anchor.anchored_at,
                a.status
            );
        }
        for d in &self.devices {
            let _ = writeln!(s, "{:<24} {:<14} {} finding(s)", d.device_serial, d.verdict.as_str(), d.findings.len());
        }
        let _ = writeln!(s, "system {}", if self.compliant { "COMPLIANT" } else { "NON_COMPLIANT" });
        s
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AuditError {
    #[error("device {0} was never registered on this chain")]
    UnknownDevice(String),
}

/// Off-chain stores the auditor may read. Each is searched in order.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sources<'a> {
    stores: &'a [OffchainStore],
}

impl<'a> Sources<'a> {
    pub fn new(stores: &'a [OffchainStore]) -> Self {
        Sources { stores }
    }

    fn record(&self, address: &Hash256) -> RecordStatus {
        let mut tampered = None;
        for store in self.stores {
            match store.get_record(address) {
                Ok(bytes) => return RecordStatus::Resolved { bytes: bytes.len() },
                Err(OffchainError::IntegrityFailure(d)) => tampered = Some(d),
                Err(_) => {}
            }
        }
        match tampered {
            Some(detail) => RecordStatus::Tampered { detail },
            None => RecordStatus::Missing,
        }
    }

    fn toc_entries(&self, owner: &PublicKeyId) -> Option<Result<Vec<TocEntry>, String>> {
        let store = self.stores.iter().find(|s| s.has_toc(owner))?;
        Some(
            store
                .toc(owner)
                .map(|t| t.entries().to_vec())
                .map_err(|e| e.to_string()),
        )
    }
}

struct Replay {
    registry: Registry,
    /// Per device: tx hash, signature validity and rule outcome of each event.
    meta: BTreeMap<String, Vec<(Hash256, bool, Option<ContractError>)>>,
    registered_at: BTreeMap<String, u64>,
    registered_by: BTreeMap<String, PublicKeyId>,
}

fn replay(chain: &[Block], genesis: &GenesisConfig) -> Replay {
    let mut r = Replay {
        registry: Registry::new(genesis.registrars.iter().copied()),
        meta: BTreeMap::new(),
        registered_at: BTreeMap::new(),
        registered_by: BTreeMap::new(),
    };
    for (height, block) in chain.iter().enumerate().skip(1) {
        let height = height as u64;
        for tx in &block.transactions {
            let sig_ok = tx.verify_signature(genesis.chain_id);
            match &tx.payload {
                Payload::RecordEvent(ev) => {
                    if r.registry.device(&ev.device_serial).is_none() {
                        continue;
                    }
                    let rule = r.registry.check_event(&tx.sender, ev).err();
                    r.registry.force_event(&tx.sender, ev, height);
                    let hash = tx.hash().unwrap_or(Hash256::ZERO);
                    r.meta.entry(ev.device_serial.clone()).or_default().push((hash, sig_ok, rule));
                }
                other => {
                    // Forged registrations and anchors carry no authority.
                    if !sig_ok {
                        continue;
                    }
                    if r.registry.apply(&tx.sender, other, height).is_ok() {
                        if let Payload::RegisterDevice { serial, .. } = other {
                            r.registered_at.insert(serial.clone(), height);
                            r.registered_by.insert(serial.clone(), tx.sender);
                        }
                    }
                }
            }
        }
    }
    r
}

fn finding_for(err: &ContractError, event: EventType) -> FindingCode {
    use FindingCode::*;
    match err {
        ContractError::PermissionDenied(d) => match d {
            Denial::NotCustodian | Denial::TargetRole { .. } | Denial::TargetInactive => BrokenCustody,
            Denial::NotOriginalManufacturer => ClassificationMismatch,
            Denial::Role { .. } if event == EventType::Classification => ClassificationMismatch,
            _ => LifecycleViolation,
        },
        ContractError::NotFound(_) => BrokenCustody,
        ContractError::InvalidTransition(TransitionError::MissingWipe { .. }) => MissingWipe,
        ContractError::InvalidTransition(TransitionError::RecycledReserved) => ClassificationMismatch,
        ContractError::MissingRecord => UnanchoredRecord,
        _ => LifecycleViolation,
    }
}

fn toc_status(
    sources: &Sources<'_>,
    registry: &Registry,
    actor: &PublicKeyId,
    detail_hash: &Hash256,
    cache: &mut BTreeMap<PublicKeyId, Option<Result<Vec<TocEntry>, String>>>,
) -> TocStatus {
    let entries = cache.entry(*actor).or_insert_with(|| sources.toc_entries(actor));
    let entries = match entries {
        None => return TocStatus::Unavailable,
        Some(Err(e)) => return TocStatus::Unreadable { detail: e.clone() },
        Some(Ok(entries)) => entries,
    };
    let Some(entry) = entries.iter().find(|e| e.content_hash == *detail_hash) else {
        return TocStatus::NotListed;
    };
    let Some(anchor) = registry.latest_anchor(actor) else {
        return TocStatus::NotAnchored {
            index: entry.index,
            anchor_length: 0,
        };
    };
    if entry.index >= anchor.toc_length {
        return TocStatus::NotAnchored {
            index: entry.index,
            anchor_length: anchor.toc_length,
        };
    }
    match offchain::prove_membership(entries, entry.index, anchor) {
        Ok(proof) if offchain::verify_membership(entry, &proof, anchor) => TocStatus::Anchored {
            index: entry.index,
            anchor_length: anchor.toc_length,
        },
        Ok(_) => TocStatus::RootMismatch,
        Err(_) => TocStatus::NotAnchored {
            index: entry.index,
            anchor_length: anchor.toc_length,
        },
    }
}

fn custody_timeline(registry: &Registry, registrant: PublicKeyId, history: &[ProcessEvent]) -> Vec<CustodySpan> {
    let role = |k: &PublicKeyId| registry.stakeholder(k).map(|s| s.role);
    let mut spans = vec![CustodySpan {
        custodian: registrant,
        custodian_role: role(&registrant),
        from_seq: None,
        to_seq: None,
    }];
    for e in history {
        let next = match e.event_type {
            EventType::Collection => Some(e.actor),
            EventType::CustodyTransfer | EventType::Sale | EventType::Donation => e.counterparty,
            _ => None,
        };
        if let Some(next) = next {
            let last = spans.last_mut().unwrap();
            if last.custodian == next {
                continue;
            }
            last.to_seq = Some(e.seq);
            spans.push(CustodySpan {
                custodian: next,
                custodian_role: role(&next),
                from_seq: Some(e.seq),
                to_seq: None,
            });
        }
    }
    spans
}

fn device_report(
    r: &Replay,
    serial: &str,
    sources: &Sources<'_>,
    cache: &mut BTreeMap<PublicKeyId, Option<Result<Vec<TocEntry>, String>>>,
) -> Result<CustodyReport, AuditError> {
    let device = r
        .registry
        .device(serial)
        .ok_or_else(|| AuditError::UnknownDevice(serial.to_owned()))?;
    let history = r.registry.get_device_history(serial).unwrap_or(&[]);
    let meta = r.meta.get(serial).map_or(&[][..], Vec::as_slice);
    let registered_at = r.registered_at.get(serial).copied().unwrap_or(0);
    let registrant = r.registered_by.get(serial).copied().unwrap_or(device.original_manufacturer);

    let mut findings = Vec::new();
    let mut events = Vec::with_capacity(history.len());
    for (e, (tx_hash, sig_ok, rule)) in history.iter().zip(meta) {
        if !sig_ok {
            findings.push(Finding {
                code: FindingCode::BadSignature,
                seq: Some(e.seq),
                detail: format!("{} signature does not verify for {}", e.event_type, e.actor.short()),
            });
        }
        if let Some(err) = rule {
            findings.push(Finding {
                code: finding_for(err, e.event_type),
                seq: Some(e.seq),
                detail: format!("{}: {err}", e.event_type),
            });
        }
        let (record, toc) = if e.detail_hash.is_zero() {
            (RecordStatus::NoRecord, TocStatus::NotListed)
        } else {
            (
                sources.record(&e.detail_hash),
                toc_status(sources, &r.registry, &e.actor, &e.detail_hash, cache),
            )
        };
        if !e.detail_hash.is_zero() {
            if let Some(f) = record_finding(&record, &toc, e) {
                findings.push(f);
            }
        }
        events.push(AuditedEvent {
            seq: e.seq,
            event_type: e.event_type,
            actor: e.actor,
            actor_role: r.registry.stakeholder(&e.actor).map(|s| s.role),
            counterparty: e.counterparty,
            result: e.result,
            classification: e.classification,
            block_height: e.block_height,
            tx_hash: *tx_hash,
            detail_hash: e.detail_hash,
            signature_valid: *sig_ok,
            rule_error: rule.as_ref().map(ToString::to_string),
            record,
            toc,
        });
    }

    let verdict = Verdict::from_findings(&findings);
    Ok(CustodyReport {
        device_serial: serial.to_owned(),
        model: device.model.clone(),
        original_manufacturer: device.original_manufacturer,
        registered_at,
        state: device.state,
        classification: device.classification,
        disposition: device.disposition,
        custody_timeline: custody_timeline(&r.registry, registrant, history),
        events,
        findings,
        verdict,
    })
}

fn record_finding(record: &RecordStatus, toc: &TocStatus, e: &ProcessEvent) -> Option<Finding> {
    let at = |code, detail: String| {
        Some(Finding {
            code,
            seq: Some(e.seq),
            detail,
        })
    };
    match (record, toc) {
        (RecordStatus::Tampered { detail }, _) => at(
            FindingCode::UnanchoredRecord,
            format!("stored record does not match the on-chain hash: {detail}"),
        ),
        (_, TocStatus::NotListed) => at(
            FindingCode::UnanchoredRecord,
            format!("record {} is not listed in the actor's TOC", e.detail_hash),
        ),
        (_, TocStatus::NotAnchored { index, anchor_length }) => at(
            FindingCode::UnanchoredRecord,
            format!("TOC entry {index} lies beyond the anchored length {anchor_length}"),
        ),
        (_, TocStatus::RootMismatch) => at(
            FindingCode::UnanchoredRecord,
            "actor's TOC does not match its on-chain root".into(),
        ),
        (_, TocStatus::Unreadable { detail }) => at(
            FindingCode::UnanchoredRecord,
            format!("actor's TOC is corrupt: {detail}"),
        ),
        (_, TocStatus::Unavailable) => at(
            FindingCode::UnresolvableRecord,
            "no available store holds the actor's TOC".into(),
        ),
        (RecordStatus::Missing, TocStatus::Anchored { .. }) => at(
            FindingCode::UnresolvableRecord,
            format!("record {} is anchored but not available", e.detail_hash),
        ),
        _ => None,
    }
}

/// Reconstructs and audits one device.
pub fn audit_device(
    chain: &[Block],
    genesis: &GenesisConfig,
    stores: &[OffchainStore],
    serial: &str,
) -> Result<CustodyReport, AuditError> {
    let r = replay(chain, genesis);
    device_report(&r, serial, &Sources::new(stores), &mut BTreeMap::new())
}

fn anchor_check(sources: &Sources<'_>, anchor: &TocAnchor) -> AnchorCheck {
    let status = match sources.toc_entries(&anchor.stakeholder) {
        None => AnchorStatus::TocUnavailable,
        Some(Err(_)) => AnchorStatus::TocUnreadable,
        Some(Ok(entries)) if (entries.len() as u64) < anchor.toc_length => AnchorStatus::TocTooShort,
        Some(Ok(entries)) => {
            let leaves: Vec<Hash256> = entries[..anchor.toc_length as usize]
                .iter()
                .map(|e| e.entry_hash)
                .collect();
            if crate::merkle::merkle_root(&leaves) == anchor.toc_root {
                AnchorStatus::Verified
            } else {
                AnchorStatus::RootMismatch
            }
        }
    };
    AnchorCheck {
        anchor: anchor.clone(),
        status,
    }
}

/// Verifies the chain, every anchor and every device.
///
/// The system is compliant when the chain verifies, every device is
/// COMPLIANT and every anchor matches an available TOC.
pub fn audit_all(chain: &[Block], genesis: &GenesisConfig, stores: &[OffchainStore]) -> SystemReport {
    let chain_report = verify::verify_chain(chain, genesis);
    let r = replay(chain, genesis);
    let sources = Sources::new(stores);
    let mut cache = BTreeMap::new();
    let devices: Vec<CustodyReport> = r
        .registry
        .devices()
        .filter_map(|d| device_report(&r, &d.serial, &sources, &mut cache).ok())
        .collect();
    let anchors: Vec<AnchorCheck> = r
        .registry
        .stakeholders()
        .flat_map(|s| r.registry.anchors(&s.id).iter())
        .map(|a| anchor_check(&sources, a))
        .collect();
    let compliant = chain_report.valid
        && devices.iter().all(CustodyReport::is_compliant)
        && anchors.iter().all(|a| a.status == AnchorStatus::Verified);
    SystemReport {
        chain: chain_report,
        devices,
        anchors,
        compliant,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Demo, Fault};

    fn demo(fault: Option<Fault>) -> (tempfile::TempDir, Demo) {
        let dir = tempfile::tempdir().unwrap();
        let demo = Demo::build(dir.path(), fault).unwrap();
        (dir, demo)
    }

    #[test]
    fn honest_demo_is_compliant() {
        let (_d, demo) = demo(None);
        let report = audit_device(&demo.blocks, &demo.genesis, &demo.stores, &demo.serial).unwrap();
        assert_eq!(report.findings, vec![], "{}", report.render_text());
        assert_eq!(report.verdict, Verdict::Compliant);
        assert_eq!(report.state, DeviceState::Finalized);
        let custodians: Vec<_> = report.custody_timeline.iter().map(|s| s.custodian).collect();
        let c = &demo.cast;
        assert_eq!(
            custodians,
            vec![
                c.manufacturer.public(),
                c.retailer.public(),
                c.logistics.public(),
                c.refurbisher.public(),
                c.retailer.public(),
                c.buyer.public()
            ]
        );
        assert!(report.events.iter().all(|e| matches!(e.toc, TocStatus::Anchored { .. })));
        let all = audit_all(&demo.blocks, &demo.genesis, &demo.stores);
        assert!(all.compliant, "{}", all.render_text());
    }

    #[test]
    fn skipped_wipe_is_flagged() {
        let (_d, demo) = demo(Some(Fault::SkipWipe));
        let report = audit_device(&demo.blocks, &demo.genesis, &demo.stores, &demo.serial).unwrap();
        assert_eq!(report.verdict, Verdict::NonCompliant);
        assert!(report.finding_codes().contains(&FindingCode::MissingWipe));
    }

    #[test]
    fn tampered_record_is_flagged() {
        let (_d, demo) = demo(Some(Fault::TamperRecord));
        let report = audit_device(&demo.blocks, &demo.genesis, &demo.stores, &demo.serial).unwrap();
        assert_eq!(report.verdict, Verdict::NonCompliant);
        assert_eq!(report.finding_codes(), vec![FindingCode::UnanchoredRecord]);
        let seq = report.findings[0].seq.unwrap();
        assert_eq!(report.events[seq as usize].event_type, EventType::DataWipe);
    }

    #[test]
    fn forged_signature_is_flagged() {
        let (_d, demo) = demo(Some(Fault::ForgeSignature));
        let report = audit_device(&demo.blocks, &demo.genesis, &demo.stores, &demo.serial).unwrap();
        assert_eq!(report.verdict, Verdict::NonCompliant);
        assert!(report.finding_codes().contains(&FindingCode::BadSignature));
        assert!(!audit_all(&demo.blocks, &demo.genesis, &demo.stores).chain.valid);
    }

    #[test]
    fn missing_store_is_indeterminate() {
        let (_d, demo) = demo(None);
        let report = audit_device(&demo.blocks, &demo.genesis, &[], &demo.serial).unwrap();
        assert_eq!(report.verdict, Verdict::Indeterminate);
        assert!(report.findings.iter().all(|f| f.code == FindingCode::UnresolvableRecord));
    }

    #[test]
    fn deleted_record_is_unresolvable() {
        let (_d, demo) = demo(None);
        let wipe = demo.record_of(EventType::DataWipe).unwrap();
        let store = demo.store_of(&demo.cast.refurbisher.public()).unwrap();
        std::fs::remove_file(store.cas().path_for(&wipe)).unwrap();
        let report = audit_device(&demo.blocks, &demo.genesis, &demo.stores, &demo.serial).unwrap();
        assert_eq!(report.verdict, Verdict::Indeterminate);
        assert_eq!(report.finding_codes(), vec![FindingCode::UnresolvableRecord]);
    }

    #[test]
    fn unknown_device_errors() {
        let (_d, demo) = demo(None);
        assert!(audit_device(&demo.blocks, &demo.genesis, &demo.stores, "nope").is_err());
    }

    #[test]
    fn reports_are_deterministic() {
        let (_d, demo) = demo(None);
        let a = serde_json::to_string(&audit_all(&demo.blocks, &demo.genesis, &demo.stores)).unwrap();
        let b = serde_json::to_string(&audit_all(&demo.blocks, &demo.genesis, &demo.stores)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn finding_mapping() {
        use FindingCode::*;
        let cases = [
            (ContractError::PermissionDenied(Denial::NotCustodian), EventType::Inspection, BrokenCustody),
            (
                ContractError::PermissionDenied(Denial::NotOriginalManufacturer),
                EventType::Classification,
                ClassificationMismatch,
            ),
            (
                ContractError::InvalidTransition(TransitionError::MissingWipe { event: EventType::Sale }),
                EventType::Sale,
                MissingWipe,
            ),
            (ContractError::MissingRecord, EventType::Repair, UnanchoredRecord),
            (ContractError::InvalidTransition(TransitionError::Terminal), EventType::Repair, LifecycleViolation),
        ];
        for (err, ev, code) in cases {
            assert_eq!(finding_for(&err, ev), code, "{err}");
        }
    }
}
