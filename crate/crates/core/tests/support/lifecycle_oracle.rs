//! Brute-force reference validator for device events.
//!
//! Written against the rule list rather than the registry code: device
//! state is never stored, it is re-derived from the accepted history on
//! every call, and each rule is a separate predicate tried in order.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rltrace_core::registry::types::{
    Classification, ComponentSpec, ComponentType, EventType, Replacement, Role, TestResult,
};
use rltrace_core::{ErrorCode, EventPayload, Hash256, Keypair, PublicKeyId, Registry};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum St {
    Registered,
    Collected,
    InTransit,
    InProcess,
    Processed,
    Finalized,
}

pub struct World {
    pub registrar: Keypair,
    /// Registered participants; index 0 is the original manufacturer.
    pub members: Vec<(Keypair, Role)>,
    /// Never registered.
    pub outsider: Keypair,
    pub serial: String,
    pub bom: Vec<ComponentSpec>,
}

impl World {
    pub fn new() -> World {
        let k = |n: u8| Keypair::from_secret([n; 32]);
        let members = vec![
            (k(10), Role::Manufacturer),
            (k(11), Role::Manufacturer),
            (k(12), Role::Retailer),
            (k(13), Role::Retailer),
            (k(14), Role::ThirdPartyLogistics),
            (k(15), Role::Refurbisher),
            (k(16), Role::Customer),
            (k(17), Role::Government),
        ];
        let serial = "ORACLE-1".to_string();
        let bom = ComponentType::ALL
            .iter()
            .map(|t| ComponentSpec {
                component_type: *t,
                serial: format!("C-{}", t.tag()),
                feature_info_hash: Hash256([t.tag(); 32]),
            })
            .collect();
        World {
            registrar: k(1),
            members,
            outsider: k(99),
            serial,
            bom,
        }
    }

    pub fn om(&self) -> PublicKeyId {
        self.members[0].0.public()
    }

    pub fn role_of(&self, id: &PublicKeyId) -> Option<Role> {
        self.members.iter().find(|(k, _)| k.public() == *id).map(|(_, r)| *r)
    }

    /// Registry with every member registered and the device registered by
    /// the original manufacturer.
    pub fn registry(&self) -> Registry {
        let mut reg = Registry::new([self.registrar.public()]);
        for (k, role) in &self.members {
            reg.register_stakeholder(&self.registrar.public(), k.public(), *role, "m", 1)
                .unwrap();
        }
        reg.register_device(&self.om(), &self.serial, "model", &self.bom, self.om())
            .unwrap();
        reg
    }

    pub fn all_keys(&self) -> Vec<PublicKeyId> {
        let mut v: Vec<_> = self.members.iter().map(|(k, _)| k.public()).collect();
        v.push(self.outsider.public());
        v
    }
}

/// Accepted events so far, with their actor.
#[derive(Clone, Default)]
pub struct Accepted(pub Vec<(PublicKeyId, EventPayload)>);

fn derive_state(world: &World, h: &Accepted) -> (St, PublicKeyId) {
    let mut st = St::Registered;
    let mut custodian = world.om();
    for (actor, ev) in &h.0 {
        st = match ev.event_type {
            EventType::Collection => St::Collected,
            EventType::CustodyTransfer if st == St::Processed => St::Processed,
            EventType::CustodyTransfer => {
                if world.role_of(&ev.counterparty.unwrap()) == Some(Role::ThirdPartyLogistics) {
                    St::InTransit
                } else {
                    St::Collected
                }
            }
            EventType::Classification => St::Processed,
            EventType::Sale | EventType::Donation => St::Finalized,
            _ => St::InProcess,
        };
        match ev.event_type {
            EventType::Collection => custodian = *actor,
            EventType::CustodyTransfer | EventType::Sale | EventType::Donation => {
                custodian = ev.counterparty.unwrap()
            }
            _ => {}
        }
    }
    (st, custodian)
}

fn installed(world: &World, h: &Accepted) -> Vec<(ComponentType, String)> {
    let mut v: Vec<(ComponentType, String)> =
        world.bom.iter().map(|c| (c.component_type, c.serial.clone())).collect();
    for (_, ev) in &h.0 {
        if let Some(r) = &ev.replacement {
            v.retain(|(_, s)| *s != r.removed_serial);
            v.push((r.installed.component_type, r.installed.serial.clone()));
        }
    }
    v
}

fn ever_used(world: &World, h: &Accepted) -> Vec<String> {
    let mut v: Vec<String> = world.bom.iter().map(|c| c.serial.clone()).collect();
    for (_, ev) in &h.0 {
        if let Some(r) = &ev.replacement {
            v.push(r.installed.serial.clone());
        }
    }
    v
}

const MATRIX: &[(EventType, &[Role])] = {
    use EventType::*;
    use Role::*;
    const P: &[Role] = &[Manufacturer, Refurbisher, Retailer];
    &[
        (Collection, &[Retailer]),
        (CustodyTransfer, &[Retailer, ThirdPartyLogistics, Manufacturer, Refurbisher]),
        (Inspection, P),
        (PhysicalConditionAnalysis, P),
        (DataWipe, P),
        (FunctionalTest, P),
        (CustomizationRemoval, P),
        (Repair, P),
        (ComponentReplacement, P),
        (Classification, P),
        (Sale, P),
        (Donation, P),
    ]
};

/// The normative role x event matrix, as a literal table.
pub fn matrix_allows(role: Role, event: EventType) -> bool {
    MATRIX
        .iter()
        .find(|(e, _)| *e == event)
        .is_some_and(|(_, roles)| roles.contains(&role))
}

fn is_processing(e: EventType) -> bool {
    use EventType::*;
    matches!(
        e,
        Inspection
            | PhysicalConditionAnalysis
            | DataWipe
            | FunctionalTest
            | CustomizationRemoval
            | Repair
            | ComponentReplacement
    )
}

struct Ctx<'a> {
    world: &'a World,
    h: &'a Accepted,
    actor: PublicKeyId,
    ev: &'a EventPayload,
    st: St,
    custodian: PublicKeyId,
}

impl Ctx<'_> {
    fn seen(&self, e: EventType) -> bool {
        self.h.0.iter().any(|(_, x)| x.event_type == e)
    }
}

type Rule = fn(&Ctx) -> bool;

/// (name, holds?, code when violated), checked top to bottom.
const RULES: &[(&str, Rule, ErrorCode)] = &[
    ("actor registered", |c| c.world.role_of(&c.actor).is_some(), ErrorCode::PermissionDenied),
    (
        "counterparty iff custody moves",
        |c| {
            use EventType::*;
            matches!(c.ev.event_type, Collection | CustodyTransfer | Sale | Donation) == c.ev.counterparty.is_some()
        },
        ErrorCode::InvalidPayload,
    ),
    ("counterparty is someone else", |c| c.ev.counterparty != Some(c.actor), ErrorCode::InvalidPayload),
    (
        "classification only on CLASSIFICATION",
        |c| (c.ev.event_type == EventType::Classification) == (c.ev.classification != Classification::None),
        ErrorCode::InvalidPayload,
    ),
    (
        "replacement only on COMPONENT_REPLACEMENT",
        |c| (c.ev.event_type == EventType::ComponentReplacement) == c.ev.replacement.is_some(),
        ErrorCode::InvalidPayload,
    ),
    (
        "functional test has an outcome",
        |c| c.ev.event_type != EventType::FunctionalTest || c.ev.result != TestResult::Na,
        ErrorCode::InvalidPayload,
    ),
    ("has a record", |c| c.ev.detail_hash != Hash256::ZERO, ErrorCode::MissingRecord),
    (
        "role matrix",
        |c| matrix_allows(c.world.role_of(&c.actor).unwrap(), c.ev.event_type),
        ErrorCode::PermissionDenied,
    ),
    (
        "remanufacture by original manufacturer",
        |c| c.ev.classification != Classification::Remanufactured || c.actor == c.world.om(),
        ErrorCode::PermissionDenied,
    ),
    (
        "actor holds custody",
        |c| c.ev.event_type == EventType::Collection || c.custodian == c.actor,
        ErrorCode::PermissionDenied,
    ),
    ("not finalized", |c| c.st != St::Finalized, ErrorCode::InvalidTransition),
    (
        "collection from registered",
        |c| c.ev.event_type != EventType::Collection || c.st == St::Registered,
        ErrorCode::InvalidTransition,
    ),
    (
        "transfer from holding states",
        |c| {
            c.ev.event_type != EventType::CustodyTransfer
                || matches!(c.st, St::Collected | St::InTransit | St::Processed)
        },
        ErrorCode::InvalidTransition,
    ),
    (
        "inspection opens processing",
        |c| c.ev.event_type != EventType::Inspection || matches!(c.st, St::Collected | St::InProcess),
        ErrorCode::InvalidTransition,
    ),
    (
        "other processing needs an open process",
        |c| !is_processing(c.ev.event_type) || c.ev.event_type == EventType::Inspection || c.st == St::InProcess,
        ErrorCode::InvalidTransition,
    ),
    (
        "recycling unsupported",
        |c| c.ev.classification != Classification::Recycled,
        ErrorCode::InvalidTransition,
    ),
    (
        "classification needs an open process",
        |c| c.ev.event_type != EventType::Classification || c.st == St::InProcess,
        ErrorCode::InvalidTransition,
    ),
    (
        "classification needs wipe, inspection, analysis",
        |c| {
            c.ev.event_type != EventType::Classification
                || (c.seen(EventType::DataWipe)
                    && c.seen(EventType::Inspection)
                    && c.seen(EventType::PhysicalConditionAnalysis))
        },
        ErrorCode::InvalidTransition,
    ),
    (
        "classification needs a pass after the last fix",
        |c| {
            if c.ev.event_type != EventType::Classification {
                return true;
            }
            let mut ok = false;
            for (_, e) in &c.h.0 {
                match e.event_type {
                    EventType::Repair | EventType::ComponentReplacement => ok = false,
                    EventType::FunctionalTest if e.result == TestResult::Pass => ok = true,
                    _ => {}
                }
            }
            ok
        },
        ErrorCode::InvalidTransition,
    ),
    (
        "release needs a wipe",
        |c| !matches!(c.ev.event_type, EventType::Sale | EventType::Donation) || c.seen(EventType::DataWipe),
        ErrorCode::InvalidTransition,
    ),
    (
        "release from processed",
        |c| !matches!(c.ev.event_type, EventType::Sale | EventType::Donation) || c.st == St::Processed,
        ErrorCode::InvalidTransition,
    ),
    (
        "transfer target registered",
        |c| c.ev.event_type != EventType::CustodyTransfer || c.world.role_of(&c.ev.counterparty.unwrap()).is_some(),
        ErrorCode::NotFound,
    ),
    (
        "transfer target can hold custody",
        |c| {
            c.ev.event_type != EventType::CustodyTransfer
                || !matches!(
                    c.world.role_of(&c.ev.counterparty.unwrap()),
                    Some(Role::Customer | Role::Government)
                )
        },
        ErrorCode::PermissionDenied,
    ),
    (
        "replaced part is installed",
        |c| {
            c.ev.replacement.as_ref().is_none_or(|r| {
                installed(c.world, c.h)
                    .iter()
                    .any(|(t, s)| *t == r.installed.component_type && *s == r.removed_serial)
            })
        },
        ErrorCode::InvalidBom,
    ),
    (
        "new part is unused",
        |c| {
            c.ev.replacement
                .as_ref()
                .is_none_or(|r| !ever_used(c.world, c.h).contains(&r.installed.serial))
        },
        ErrorCode::InvalidBom,
    ),
];

/// Decides an event against the accepted history.
pub fn judge(world: &World, h: &Accepted, actor: &PublicKeyId, ev: &EventPayload) -> Result<(), ErrorCode> {
    let (st, custodian) = derive_state(world, h);
    let ctx = Ctx {
        world,
        h,
        actor: *actor,
        ev,
        st,
        custodian,
    };
    for (_, holds, code) in RULES {
        if !holds(&ctx) {
            return Err(*code);
        }
    }
    Ok(())
}

/// Next step a well-behaved custodian would plausibly take, with some
/// deliberate skipping ahead.
fn guided_step<R: Rng>(rng: &mut R, world: &World, h: &Accepted) -> EventType {
    use EventType::*;
    let (st, _) = derive_state(world, h);
    let seen = |e: EventType| h.0.iter().any(|(_, x)| x.event_type == e);
    if rng.gen_bool(0.1) {
        return *[Classification, Sale, Donation].choose(rng).unwrap();
    }
    match st {
        St::Registered => Collection,
        St::Collected | St::InTransit => {
            if rng.gen_bool(0.4) {
                CustodyTransfer
            } else {
                Inspection
            }
        }
        St::InProcess => {
            if rng.gen_bool(0.15) {
                return *[Repair, CustomizationRemoval, ComponentReplacement].choose(rng).unwrap();
            }
            let mut tested = false;
            for (_, e) in &h.0 {
                match e.event_type {
                    Repair | ComponentReplacement => tested = false,
                    FunctionalTest if e.result == TestResult::Pass => tested = true,
                    _ => {}
                }
            }
            if !seen(PhysicalConditionAnalysis) {
                PhysicalConditionAnalysis
            } else if !seen(DataWipe) {
                DataWipe
            } else if !tested {
                FunctionalTest
            } else {
                Classification
            }
        }
        St::Processed => *[CustodyTransfer, Sale, Donation].choose(rng).unwrap(),
        St::Finalized => *EventType::ALL.choose(rng).unwrap(),
    }
}

/// A random event, biased toward the custodian and the next pipeline step
/// so that long accepted histories are common.
pub fn random_event<R: Rng>(rng: &mut R, world: &World, h: &Accepted) -> (PublicKeyId, EventPayload) {
    let keys = world.all_keys();
    let (_, custodian) = derive_state(world, h);
    let actor = if rng.gen_bool(0.85) {
        custodian
    } else {
        *keys.choose(rng).unwrap()
    };
    let event_type = if rng.gen_bool(0.8) {
        guided_step(rng, world, h)
    } else {
        *EventType::ALL.choose(rng).unwrap()
    };
    let actor = if event_type == EventType::Collection && rng.gen_bool(0.7) {
        world.members[2 + rng.gen_range(0..2)].0.public()
    } else {
        actor
    };
    let detail = if rng.gen_bool(0.03) {
        Hash256::ZERO
    } else {
        Hash256([rng.gen_range(1..=255); 32])
    };
    let mut ev = EventPayload::new(event_type, world.serial.clone(), detail);

    let wants_cp = matches!(
        event_type,
        EventType::Collection | EventType::CustodyTransfer | EventType::Sale | EventType::Donation
    );
    if wants_cp != rng.gen_bool(0.05) {
        let cp = if event_type == EventType::CustodyTransfer && rng.gen_bool(0.7) {
            world.members[rng.gen_range(0..6)].0.public()
        } else {
            *keys.choose(rng).unwrap()
        };
        ev = ev.with_counterparty(cp);
    }
    ev = ev.with_result(match rng.gen_range(0..10) {
        0 => TestResult::Na,
        1..=2 => TestResult::Fail,
        _ if event_type == EventType::FunctionalTest => TestResult::Pass,
        _ => *TestResult::ALL.choose(rng).unwrap(),
    });
    if (event_type == EventType::Classification) != rng.gen_bool(0.05) {
        ev = ev.with_classification(match rng.gen_range(0..10) {
            0 => Classification::Recycled,
            1..=3 => Classification::Remanufactured,
            _ => Classification::Refurbished,
        });
    }
    if (event_type == EventType::ComponentReplacement) != rng.gen_bool(0.05) {
        let t = *ComponentType::ALL.choose(rng).unwrap();
        let current = installed(world, h);
        let removed = if rng.gen_bool(0.8) {
            current.iter().find(|(ct, _)| *ct == t).unwrap().1.clone()
        } else {
            current.choose(rng).unwrap().1.clone()
        };
        let new_serial = if rng.gen_bool(0.9) {
            format!("N-{}", rng.gen_range(0..6))
        } else {
            world.bom.choose(rng).unwrap().serial.clone()
        };
        ev = ev.with_replacement(Replacement {
            removed_serial: removed,
            installed: ComponentSpec {
                component_type: t,
                serial: new_serial,
                feature_info_hash: Hash256([7; 32]),
            },
        });
    }
    (actor, ev)
}

/// Outcome of one randomized sequence.
#[derive(Default)]
pub struct SequenceOutcome {
    pub events: usize,
    pub discrepancies: Vec<String>,
    /// Event types accepted by the registry, in order.
    pub accepted: Vec<EventType>,
}

/// Feeds a random sequence to both the registry and the oracle.
pub fn run_sequence<R: Rng>(rng: &mut R, world: &World, max_len: usize) -> SequenceOutcome {
    let mut reg = world.registry();
    let mut h = Accepted::default();
    let len = if rng.gen_bool(0.5) {
        max_len
    } else {
        rng.gen_range(1..=max_len)
    };
    let mut out = SequenceOutcome::default();
    for i in 0..len {
        let (actor, ev) = random_event(rng, world, &h);
        let expected = judge(world, &h, &actor, &ev);
        let actual = reg.record_event(&actor, &ev, 2 + i as u64).map(|_| ()).map_err(|e| e.code());
        out.events += 1;
        if expected != actual {
            out.discrepancies.push(format!(
                "step {i}: {} by {:?}: oracle {expected:?}, registry {actual:?}",
                ev.event_type,
                world.role_of(&actor)
            ));
        }
        if actual.is_ok() {
            out.accepted.push(ev.event_type);
            h.0.push((actor, ev));
        }
    }
    out
}

/// True if no SALE or DONATION precedes the first DATA_WIPE.
pub fn wipe_before_release(history: &[EventType]) -> bool {
    let mut wiped = false;
    for e in history {
        match e {
            EventType::DataWipe => wiped = true,
            EventType::Sale | EventType::Donation if !wiped => return false,
            _ => {}
        }
    }
    true
}
