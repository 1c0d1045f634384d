//! Role x event grid: for every cell, put a device in a state where the
//! event is otherwise valid for an actor of that role and record it.

#![allow(dead_code)]

use rltrace_core::registry::types::{Classification, EventType, Role, TestResult};
use rltrace_core::registry::ContractError;
use rltrace_core::{EventPayload, Hash256, Keypair, PublicKeyId, Registry};

use super::lifecycle_oracle::World;

pub struct Cell {
    pub role: Role,
    pub event: EventType,
    pub outcome: Result<(), ContractError>,
}

fn key_for(world: &World, role: Role) -> Keypair {
    world
        .members
        .iter()
        .skip(if role == Role::Manufacturer { 0 } else { 1 })
        .find(|(_, r)| *r == role)
        .map(|(k, _)| k.clone())
        .unwrap()
}

fn rec(h: u8) -> Hash256 {
    Hash256([h; 32])
}

/// Records `event` by a stakeholder of `role` on a freshly prepared device.
pub fn cell(role: Role, event: EventType) -> Cell {
    let world = World::new();
    let mut reg: Registry = world.registry();
    let serial = world.serial.clone();
    let actor = key_for(&world, role).public();
    let retailer = key_for(&world, Role::Retailer).public();
    let customer = key_for(&world, Role::Customer).public();
    let ev = |t: EventType| EventPayload::new(t, serial.clone(), rec(t.tag()));

    if event != EventType::Collection {
        reg.record_event(&retailer, &ev(EventType::Collection).with_counterparty(customer), 2)
            .unwrap();
        let holder = if matches!(role, Role::Customer | Role::Government) || role == Role::Retailer {
            retailer
        } else {
            reg.record_event(&retailer, &ev(EventType::CustodyTransfer).with_counterparty(actor), 3)
                .unwrap();
            actor
        };
        let mut prefix: Vec<EventPayload> = Vec::new();
        let processing_needed = !matches!(event, EventType::CustodyTransfer | EventType::Inspection);
        if processing_needed {
            prefix.push(ev(EventType::Inspection));
        }
        if matches!(event, EventType::Classification | EventType::Sale | EventType::Donation) {
            prefix.push(ev(EventType::PhysicalConditionAnalysis));
            prefix.push(ev(EventType::DataWipe));
            prefix.push(ev(EventType::FunctionalTest).with_result(TestResult::Pass));
        }
        if matches!(event, EventType::Sale | EventType::Donation) {
            prefix.push(ev(EventType::Classification).with_classification(Classification::Refurbished));
        }
        // A holder that may not process leaves the device where it is; the
        // role check fires first for such actors anyway.
        for (i, p) in prefix.iter().enumerate() {
            let _ = reg.record_event(&holder, p, 4 + i as u64);
        }
    }

    let other_holder: PublicKeyId = if role == Role::Refurbisher {
        retailer
    } else {
        key_for(&world, Role::Refurbisher).public()
    };
    let mut payload = ev(event);
    payload = match event {
        EventType::Collection => payload.with_counterparty(world.outsider.public()),
        EventType::CustodyTransfer => payload.with_counterparty(other_holder),
        EventType::Sale | EventType::Donation => payload.with_counterparty(world.outsider.public()),
        EventType::FunctionalTest => payload.with_result(TestResult::Pass),
        EventType::Classification => payload.with_classification(Classification::Refurbished),
        EventType::ComponentReplacement => {
            let old = &world.bom[2];
            payload.with_replacement(rltrace_core::registry::types::Replacement {
                removed_serial: old.serial.clone(),
                installed: rltrace_core::registry::types::ComponentSpec {
                    component_type: old.component_type,
                    serial: "NEW-PART".into(),
                    feature_info_hash: rec(9),
                },
            })
        }
        _ => payload,
    };
    let outcome = reg.record_event(&actor, &payload, 20).map(|_| ());
    Cell { role, event, outcome }
}

/// All 72 cells.
pub fn grid() -> Vec<Cell> {
    let mut out = Vec::new();
    for role in Role::ALL {
        for event in EventType::ALL {
            out.push(cell(*role, *event));
        }
    }
    out
}
