//! Stakeholder, product and process contracts.
//!
//! [`Registry`] is a deterministic state machine. Every mutation arrives
//! through [`Registry::apply`] with an already-authenticated sender and the
//! height of the block that carries it. Getters are permissionless.
//!
//! Checks run in a fixed order so that each rejected input maps to exactly
//! one error:
//!
//! * `record_event`: device exists, actor registered and active, payload
//!   shape, non-zero detail hash, role matrix, remanufacture authority,
//!   custodian (COLLECTION exempt), lifecycle, then referential checks on the
//!   transfer target or replaced component.
//! * `register_device`: actor registered and active, actor role, field
//!   limits, serial unused, bill of materials, original manufacturer.

pub mod acl;
pub mod lifecycle;
pub mod types;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::codec::Writer;
use crate::crypto::PublicKeyId;
use crate::error::ErrorCode;
use crate::hash::Hash256;
use crate::tx::{EventPayload, Payload};

pub use lifecycle::TransitionError;
use types::*;

pub const MAX_DISPLAY_NAME_CHARS: usize = 256;
pub const MAX_SERIAL_CHARS: usize = 128;
pub const MAX_MODEL_CHARS: usize = 256;

/// Why a permission check failed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Denial {
    NotRegistrar,
    UnknownActor,
    Inactive,
    Role { role: Role, action: String },
    NotCustodian,
    NotOriginalManufacturer,
    ForeignManufacturer,
    TargetRole { role: Role },
    TargetInactive,
}

impl fmt::Display for Denial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Denial::NotRegistrar => f.write_str("signer is not a genesis registrar"),
            Denial::UnknownActor => f.write_str("signer is not a registered stakeholder"),
            Denial::Inactive => f.write_str("signer is deactivated"),
            Denial::Role { role, action } => write!(f, "role {role} may not {action}"),
            Denial::NotCustodian => f.write_str("signer is not the device custodian"),
            Denial::NotOriginalManufacturer => {
                f.write_str("only the original manufacturer may remanufacture")
            }
            Denial::ForeignManufacturer => {
                f.write_str("a manufacturer may only register its own devices")
            }
            Denial::TargetRole { role } => write!(f, "role {role} cannot take custody"),
            Denial::TargetInactive => f.write_str("transfer target is deactivated"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
pub enum ContractError {
    #[error("permission denied: {0}")]
    PermissionDenied(Denial),
    #[error("already exists: {0}")]
    AlreadyExists(String),
    #[error("invalid bill of materials: {0}")]
    InvalidBom(String),
    #[error("invalid transition: {0}")]
    InvalidTransition(TransitionError),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("event has no off-chain record (zero detail hash)")]
    MissingRecord,
    #[error("nothing new to anchor: {anchored} entries already anchored, {requested} requested")]
    NoProgress { anchored: u64, requested: u64 },
    #[error("invalid payload: {0}")]
    InvalidPayload(String),
}

impl ContractError {
    pub fn code(&self) -> ErrorCode {
        match self {
            ContractError::PermissionDenied(_) => ErrorCode::PermissionDenied,
            ContractError::AlreadyExists(_) => ErrorCode::AlreadyExists,
            ContractError::InvalidBom(_) => ErrorCode::InvalidBom,
            ContractError::InvalidTransition(_) => ErrorCode::InvalidTransition,
            ContractError::NotFound(_) => ErrorCode::NotFound,
            ContractError::MissingRecord => ErrorCode::MissingRecord,
            ContractError::NoProgress { .. } => ErrorCode::NoProgress,
            ContractError::InvalidPayload(_) => ErrorCode::InvalidPayload,
        }
    }
}

fn denied(d: Denial) -> ContractError {
    ContractError::PermissionDenied(d)
}

/// Per-stakeholder statistics, served without authentication.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StakeholderStats {
    pub id: PublicKeyId,
    pub role: Role,
    pub display_name: String,
    pub active: bool,
    pub event_counts: BTreeMap<EventType, u64>,
    pub devices_registered: u64,
    pub devices_handled: u64,
    pub latest_anchor: Option<TocAnchor>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Activity {
    event_counts: BTreeMap<EventType, u64>,
    registered: u64,
    handled: BTreeSet<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Registry {
    registrars: BTreeSet<PublicKeyId>,
    stakeholders: BTreeMap<PublicKeyId, StakeholderRecord>,
    devices: BTreeMap<String, DeviceRecord>,
    histories: BTreeMap<String, Vec<ProcessEvent>>,
    anchors: BTreeMap<PublicKeyId, Vec<TocAnchor>>,
    activity: BTreeMap<PublicKeyId, Activity>,
}

fn check_len(field: &str, value: &str, max: usize, allow_empty: bool) -> Result<(), ContractError> {
    let n = value.chars().count();
    if n > max {
        return Err(ContractError::InvalidPayload(format!("{field} is {n} chars, limit {max}")));
    }
    if n == 0 && !allow_empty {
        return Err(ContractError::InvalidPayload(format!("{field} is empty")));
    }
    Ok(())
}

impl Registry {
    pub fn new(registrars: impl IntoIterator<Item = PublicKeyId>) -> Self {
        Registry {
            registrars: registrars.into_iter().collect(),
            ..Default::default()
        }
    }

    /// Dispatches a transaction payload.
    pub fn apply(&mut self, sender: &PublicKeyId, payload: &Payload, height: u64) -> Result<(), ContractError> {
        match payload {
            Payload::RegisterStakeholder {
                candidate,
                role,
                display_name,
            } => self
                .register_stakeholder(sender, *candidate, *role, display_name, height)
                .map(|_| ()),
            Payload::RegisterDevice {
                serial,
                model,
                original_manufacturer,
                components,
            } => self
                .register_device(sender, serial, model, components, *original_manufacturer)
                .map(|_| ()),
            Payload::RecordEvent(ev) => self.record_event(sender, ev, height).map(|_| ()),
            Payload::AnchorToc {
                toc_length,
                toc_root,
            } => self
                .anchor_toc(sender, *toc_length, *toc_root, height)
                .map(|_| ()),
            Payload::SetStakeholderActive {
                stakeholder,
                active,
            } => self.set_active(sender, stakeholder, *active),
        }
    }

    pub fn register_stakeholder(
        &mut self,
        registrar: &PublicKeyId,
        candidate: PublicKeyId,
        role: Role,
        display_name: &str,
        height: u64,
    ) -> Result<&StakeholderRecord, ContractError> {
        if !self.registrars.contains(registrar) {
            return Err(denied(Denial::NotRegistrar));
        }
        check_len("display_name", display_name, MAX_DISPLAY_NAME_CHARS, true)?;
        if self.stakeholders.contains_key(&candidate) {
            return Err(ContractError::AlreadyExists(format!("stakeholder {candidate}")));
        }
        let record = StakeholderRecord {
            id: candidate,
            role,
            display_name: display_name.to_owned(),
            registered_at: height,
            active: true,
            toc_state: None,
        };
        Ok(self.stakeholders.entry(candidate).or_insert(record))
    }

    pub fn set_active(&mut self, registrar: &PublicKeyId, id: &PublicKeyId, active: bool) -> Result<(), ContractError> {
        if !self.registrars.contains(registrar) {
            return Err(denied(Denial::NotRegistrar));
        }
        let rec = self
            .stakeholders
            .get_mut(id)
            .ok_or_else(|| ContractError::NotFound(format!("stakeholder {id}")))?;
        rec.active = active;
        Ok(())
    }

    fn active_actor(&self, actor: &PublicKeyId) -> Result<&StakeholderRecord, ContractError> {
        let rec = self.stakeholders.get(actor).ok_or(denied(Denial::UnknownActor))?;
        if !rec.active {
            return Err(denied(Denial::Inactive));
        }
        Ok(rec)
    }

    pub fn register_device(
        &mut self,
        actor: &PublicKeyId,
        serial: &str,
        model: &str,
        components: &[ComponentSpec],
        original_manufacturer: PublicKeyId,
    ) -> Result<&DeviceRecord, ContractError> {
        let role = self.active_actor(actor)?.role;
        if !acl::may_register_device(role) {
            return Err(denied(Denial::Role {
                role,
                action: "register devices".into(),
            }));
        }
        check_len("serial", serial, MAX_SERIAL_CHARS, false)?;
        check_len("model", model, MAX_MODEL_CHARS, true)?;
        for c in components {
            check_len("component serial", &c.serial, MAX_SERIAL_CHARS, false)?;
        }
        if self.devices.contains_key(serial) {
            return Err(ContractError::AlreadyExists(format!("device {serial}")));
        }
        check_bom(components)?;
        let om = self
            .stakeholders
            .get(&original_manufacturer)
            .ok_or_else(|| ContractError::NotFound(format!("manufacturer {original_manufacturer}")))?;
        if om.role != Role::Manufacturer {
            return Err(ContractError::InvalidPayload(format!(
                "original manufacturer has role {}",
                om.role
            )));
        }
        if role == Role::Manufacturer && original_manufacturer != *actor {
            return Err(denied(Denial::ForeignManufacturer));
        }

        let device = DeviceRecord {
            serial: serial.to_owned(),
            model: model.to_owned(),
            original_manufacturer,
            components: components.iter().map(ComponentRecord::from).collect(),
            state: DeviceState::Registered,
            classification: Classification::None,
            disposition: Disposition::None,
            custodian: *actor,
            event_count: 0,
        };
        let activity = self.activity.entry(*actor).or_default();
        activity.registered += 1;
        activity.handled.insert(serial.to_owned());
        self.histories.insert(serial.to_owned(), Vec::new());
        Ok(self.devices.entry(serial.to_owned()).or_insert(device))
    }

    /// Validates an event without touching state.
    pub fn check_event(&self, actor: &PublicKeyId, ev: &EventPayload) -> Result<(), ContractError> {
        let device = self
            .devices
            .get(&ev.device_serial)
            .ok_or_else(|| ContractError::NotFound(format!("device {}", ev.device_serial)))?;
        let role = self.active_actor(actor)?.role;
        check_event_shape(actor, ev)?;
        if ev.detail_hash.is_zero() {
            return Err(ContractError::MissingRecord);
        }
        if !acl::role_permits(role, ev.event_type) {
            return Err(denied(Denial::Role {
                role,
                action: format!("record {}", ev.event_type),
            }));
        }
        if ev.classification == Classification::Remanufactured && *actor != device.original_manufacturer {
            return Err(denied(Denial::NotOriginalManufacturer));
        }
        if ev.event_type != EventType::Collection && device.custodian != *actor {
            return Err(denied(Denial::NotCustodian));
        }
        let history = self.histories.get(&ev.device_serial).map_or(&[][..], Vec::as_slice);
        lifecycle::check(device.state, history, ev.event_type, ev.classification)
            .map_err(ContractError::InvalidTransition)?;

        if ev.event_type == EventType::CustodyTransfer {
            let target = ev.counterparty.expect("shape checked");
            let rec = self
                .stakeholders
                .get(&target)
                .ok_or_else(|| ContractError::NotFound(format!("transfer target {target}")))?;
            if !acl::may_hold_custody(rec.role) {
                return Err(denied(Denial::TargetRole { role: rec.role }));
            }
            if !rec.active {
                return Err(denied(Denial::TargetInactive));
            }
        }
        if let Some(rep) = &ev.replacement {
            let ctype = rep.installed.component_type;
            if !device.installed(ctype).any(|c| c.serial == rep.removed_serial) {
                return Err(ContractError::InvalidBom(format!(
                    "{} is not the installed {ctype}",
                    rep.removed_serial
                )));
            }
            if device.components.iter().any(|c| c.serial == rep.installed.serial) {
                return Err(ContractError::InvalidBom(format!(
                    "component serial {} already used in this device",
                    rep.installed.serial
                )));
            }
        }
        Ok(())
    }

    pub fn record_event(
        &mut self,
        actor: &PublicKeyId,
        ev: &EventPayload,
        height: u64,
    ) -> Result<&DeviceRecord, ContractError> {
        self.check_event(actor, ev)?;
        self.force_event(actor, ev, height);
        Ok(&self.devices[&ev.device_serial])
    }

    /// Convenience wrapper that records a CLASSIFICATION event.
    pub fn classify_device(
        &mut self,
        actor: &PublicKeyId,
        serial: &str,
        classification: Classification,
        detail_hash: Hash256,
        height: u64,
    ) -> Result<&DeviceRecord, ContractError> {
        let ev = EventPayload::new(EventType::Classification, serial, detail_hash)
            .with_classification(classification);
        self.record_event(actor, &ev, height)
    }

    /// Applies an event's effects without validation.
    ///
    /// Used by audit replays that must keep going past a rule violation.
    /// Events on unknown devices are ignored.
    pub fn force_event(&mut self, actor: &PublicKeyId, ev: &EventPayload, height: u64) {
        let target_role = ev
            .counterparty
            .and_then(|c| self.stakeholders.get(&c))
            .map(|r| r.role);
        let Some(device) = self.devices.get_mut(&ev.device_serial) else {
            return;
        };
        let history = self.histories.entry(ev.device_serial.clone()).or_default();
        let seq = history.len() as u64;
        history.push(ProcessEvent {
            event_type: ev.event_type,
            device_serial: ev.device_serial.clone(),
            actor: *actor,
            counterparty: ev.counterparty,
            result: ev.result,
            detail_hash: ev.detail_hash,
            classification: ev.classification,
            replacement: ev.replacement.clone(),
            seq,
            block_height: height,
        });

        device.state = lifecycle::next_state(device.state, ev.event_type, target_role);
        device.event_count = seq + 1;
        match ev.event_type {
            EventType::Collection => device.custodian = *actor,
            EventType::CustodyTransfer | EventType::Sale | EventType::Donation => {
                if let Some(c) = ev.counterparty {
                    device.custodian = c;
                }
            }
            _ => {}
        }
        match ev.event_type {
            EventType::Classification if ev.classification != Classification::None => {
                device.classification = ev.classification;
            }
            EventType::Sale => device.disposition = Disposition::SoldSecondary,
            EventType::Donation => device.disposition = Disposition::Donated,
            _ => {}
        }
        if let Some(rep) = &ev.replacement {
            for c in device.components.iter_mut() {
                if c.installed
                    && c.serial == rep.removed_serial
                    && c.component_type == rep.installed.component_type
                {
                    c.installed = false;
                }
            }
            device.components.push(ComponentRecord::from(&rep.installed));
        }

        let activity = self.activity.entry(*actor).or_default();
        *activity.event_counts.entry(ev.event_type).or_default() += 1;
        activity.handled.insert(ev.device_serial.clone());
    }

    pub fn anchor_toc(
        &mut self,
        sender: &PublicKeyId,
        toc_length: u64,
        toc_root: Hash256,
        height: u64,
    ) -> Result<TocAnchor, ContractError> {
        self.active_actor(sender)?;
        let anchored = self.latest_anchor(sender).map_or(0, |a| a.toc_length);
        if toc_length <= anchored {
            return Err(ContractError::NoProgress {
                anchored,
                requested: toc_length,
            });
        }
        let anchor = TocAnchor {
            stakeholder: *sender,
            toc_length,
            toc_root,
            anchored_at: height,
        };
        self.anchors.entry(*sender).or_default().push(anchor.clone());
        if let Some(rec) = self.stakeholders.get_mut(sender) {
            rec.toc_state = Some(anchor.clone());
        }
        Ok(anchor)
    }

    pub fn is_registrar(&self, key: &PublicKeyId) -> bool {
        self.registrars.contains(key)
    }

    pub fn stakeholder(&self, id: &PublicKeyId) -> Option<&StakeholderRecord> {
        self.stakeholders.get(id)
    }

    pub fn stakeholders(&self) -> impl Iterator<Item = &StakeholderRecord> {
        self.stakeholders.values()
    }

    pub fn device(&self, serial: &str) -> Option<&DeviceRecord> {
        self.devices.get(serial)
    }

    pub fn devices(&self) -> impl Iterator<Item = &DeviceRecord> {
        self.devices.values()
    }

    pub fn get_device_history(&self, serial: &str) -> Result<&[ProcessEvent], ContractError> {
        self.histories
            .get(serial)
            .map(Vec::as_slice)
            .ok_or_else(|| ContractError::NotFound(format!("device {serial}")))
    }

    pub fn anchors(&self, id: &PublicKeyId) -> &[TocAnchor] {
        self.anchors.get(id).map_or(&[], Vec::as_slice)
    }

    pub fn latest_anchor(&self, id: &PublicKeyId) -> Option<&TocAnchor> {
        self.anchors.get(id).and_then(|a| a.last())
    }

    pub fn get_stakeholder_stats(&self, id: &PublicKeyId) -> Result<StakeholderStats, ContractError> {
        let rec = self
            .stakeholders
            .get(id)
            .ok_or_else(|| ContractError::NotFound(format!("stakeholder {id}")))?;
        let activity = self.activity.get(id).cloned().unwrap_or_default();
        Ok(StakeholderStats {
            id: *id,
            role: rec.role,
            display_name: rec.display_name.clone(),
            active: rec.active,
            event_counts: activity.event_counts,
            devices_registered: activity.registered,
            devices_handled: activity.handled.len() as u64,
            latest_anchor: self.latest_anchor(id).cloned(),
        })
    }

    /// SHA-256 over a canonical encoding of all committed registry state.
    pub fn state_digest(&self) -> Hash256 {
        let mut w = Writer::new();
        w.raw(b"rltrace/registry/v1");
        w.u64(self.registrars.len() as u64);
        for r in &self.registrars {
            w.key(r);
        }
        w.u64(self.stakeholders.len() as u64);
        for s in self.stakeholders.values() {
            w.key(&s.id).u8(s.role.tag());
            put_str(&mut w, &s.display_name);
            w.u64(s.registered_at).u8(u8::from(s.active));
        }
        w.u64(self.devices.len() as u64);
        for d in self.devices.values() {
            put_str(&mut w, &d.serial);
            put_str(&mut w, &d.model);
            w.key(&d.original_manufacturer)
                .u8(d.state.tag())
                .u8(d.classification.tag())
                .u8(d.disposition.tag())
                .key(&d.custodian)
                .u64(d.event_count)
                .u64(d.components.len() as u64);
            for c in &d.components {
                w.u8(c.component_type.tag());
                put_str(&mut w, &c.serial);
                w.hash(&c.feature_info_hash).u8(u8::from(c.installed));
            }
            let history = self.histories.get(&d.serial).map_or(&[][..], Vec::as_slice);
            w.u64(history.len() as u64);
            for e in history {
                w.u8(e.event_type.tag())
                    .key(&e.actor)
                    .opt_key(e.counterparty.as_ref())
                    .u8(e.result.tag())
                    .hash(&e.detail_hash)
                    .u8(e.classification.tag())
                    .u64(e.seq)
                    .u64(e.block_height);
                match &e.replacement {
                    None => {
                        w.u8(0);
                    }
                    Some(r) => {
                        w.u8(1);
                        put_str(&mut w, &r.removed_serial);
                        w.u8(r.installed.component_type.tag());
                        put_str(&mut w, &r.installed.serial);
                        w.hash(&r.installed.feature_info_hash);
                    }
                }
            }
        }
        w.u64(self.anchors.len() as u64);
        for (id, list) in &self.anchors {
            w.key(id).u64(list.len() as u64);
            for a in list {
                w.u64(a.toc_length).hash(&a.toc_root).u64(a.anchored_at);
            }
        }
        Hash256::digest(&w.into_bytes())
    }
}

fn put_str(w: &mut Writer, s: &str) {
    w.u32(s.len() as u32).raw(s.as_bytes());
}

fn check_bom(components: &[ComponentSpec]) -> Result<(), ContractError> {
    let types: BTreeSet<_> = components.iter().map(|c| c.component_type).collect();
    if components.len() != ComponentType::ALL.len() || types.len() != ComponentType::ALL.len() {
        let missing: Vec<_> = ComponentType::ALL
            .iter()
            .filter(|t| !types.contains(t))
            .map(|t| t.as_str())
            .collect();
        return Err(ContractError::InvalidBom(format!(
            "need exactly one of each component type; got {} entries, missing [{}]",
            components.len(),
            missing.join(", ")
        )));
    }
    let serials: BTreeSet<_> = components.iter().map(|c| c.serial.as_str()).collect();
    if serials.len() != components.len() {
        return Err(ContractError::InvalidBom("duplicate component serial".into()));
    }
    Ok(())
}

fn check_event_shape(actor: &PublicKeyId, ev: &EventPayload) -> Result<(), ContractError> {
    let bad = |msg: String| Err(ContractError::InvalidPayload(msg));
    let et = ev.event_type;
    if et.moves_custody() != ev.counterparty.is_some() {
        return bad(if et.moves_custody() {
            format!("{et} requires a counterparty")
        } else {
            format!("{et} takes no counterparty")
        });
    }
    if ev.counterparty.as_ref() == Some(actor) {
        return bad("counterparty must differ from the actor".into());
    }
    if (et == EventType::Classification) != (ev.classification != Classification::None) {
        return bad("classification is set exactly on CLASSIFICATION events".into());
    }
    if (et == EventType::ComponentReplacement) != ev.replacement.is_some() {
        return bad("replacement is set exactly on COMPONENT_REPLACEMENT events".into());
    }
    if et == EventType::FunctionalTest && ev.result == TestResult::Na {
        return bad("FUNCTIONAL_TEST needs a PASS or FAIL result".into());
    }
    if let Some(rep) = &ev.replacement {
        check_len("removed serial", &rep.removed_serial, MAX_SERIAL_CHARS, false)?;
        check_len("component serial", &rep.installed.serial, MAX_SERIAL_CHARS, false)?;
    }
    Ok(())
}
