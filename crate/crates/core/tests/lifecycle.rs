mod support;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rltrace_core::registry::types::{ComponentType, DeviceState, EventType, Role};
use rltrace_core::registry::{ContractError, Denial};
use support::lifecycle_oracle::{self as oracle, World};
use support::matrix_grid;

#[test]
fn registry_agrees_with_oracle() {
    let world = World::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut accepted_events = 0;
    for _ in 0..10_000 {
        let out = oracle::run_sequence(&mut rng, &world, 12);
        assert!(out.discrepancies.is_empty(), "{:#?}", out.discrepancies);
        accepted_events += out.accepted.len();
    }
    assert!(accepted_events > 10_000);
}

#[test]
fn random_sequences_reach_release() {
    let world = World::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut seen = std::collections::BTreeSet::new();
    for _ in 0..10_000 {
        let out = oracle::run_sequence(&mut rng, &world, 12);
        seen.extend(out.accepted);
    }
    for e in [EventType::Classification, EventType::Sale, EventType::Donation] {
        assert!(seen.contains(&e), "no sequence accepted {e}");
    }
}

#[test]
fn role_event_grid_matches_matrix() {
    let cells = matrix_grid::grid();
    assert_eq!(cells.len(), 72);
    for c in &cells {
        if oracle::matrix_allows(c.role, c.event) {
            assert_eq!(c.outcome, Ok(()), "{} {}", c.role, c.event);
        } else {
            assert!(
                matches!(c.outcome, Err(ContractError::PermissionDenied(Denial::Role { .. }))),
                "{} {}: {:?}",
                c.role,
                c.event,
                c.outcome
            );
        }
    }
}

#[test]
fn readers_never_write() {
    for c in matrix_grid::grid() {
        if matches!(c.role, Role::Customer | Role::Government) {
            assert!(c.outcome.is_err());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    /// Invariants that must hold after every committed event.
    #[test]
    fn committed_state_invariants(seed in any::<u64>()) {
        let world = World::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut reg = world.registry();
        let mut h = oracle::Accepted::default();
        let mut custodian = world.om();
        for i in 0..12u64 {
            let (actor, ev) = oracle::random_event(&mut rng, &world, &h);
            if reg.record_event(&actor, &ev, 2 + i).is_err() {
                continue;
            }
            let d = reg.device(&world.serial).unwrap();
            // custody changes only through custody events
            let moved = matches!(
                ev.event_type,
                EventType::Collection | EventType::CustodyTransfer | EventType::Sale | EventType::Donation
            );
            let expected = match ev.event_type {
                EventType::Collection => actor,
                _ if moved => ev.counterparty.unwrap(),
                _ => custodian,
            };
            prop_assert_eq!(d.custodian, expected);
            custodian = d.custodian;
            // classification set iff processed or finalized
            let classified = d.classification != rltrace_core::registry::types::Classification::None;
            prop_assert_eq!(classified, matches!(d.state, DeviceState::Processed | DeviceState::Finalized));
            // disposition set iff finalized
            let disposed = d.disposition != rltrace_core::registry::types::Disposition::None;
            prop_assert_eq!(disposed, d.state == DeviceState::Finalized);
            // exactly one installed part per type
            for t in ComponentType::ALL {
                prop_assert_eq!(d.installed(*t).count(), 1);
            }
            // dense sequence numbers
            let hist = reg.get_device_history(&world.serial).unwrap();
            for (n, e) in hist.iter().enumerate() {
                prop_assert_eq!(e.seq, n as u64);
            }
            prop_assert!(oracle::wipe_before_release(
                &hist.iter().map(|e| e.event_type).collect::<Vec<_>>()
            ));
            h.0.push((actor, ev));
        }
        // every replaced part stays on record as uninstalled
        let d = reg.device(&world.serial).unwrap();
        let replaced = h.0.iter().filter(|(_, e)| e.replacement.is_some()).count();
        prop_assert_eq!(d.components.len(), 6 + replaced);
        prop_assert_eq!(d.components.iter().filter(|c| !c.installed).count(), replaced);
    }
}
