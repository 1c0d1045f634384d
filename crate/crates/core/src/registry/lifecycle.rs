//! Device lifecycle machine.
//!
//! ```text
//! REGISTERED --COLLECTION--> COLLECTED --CUSTODY_TRANSFER--> IN_TRANSIT (to 3PL) | COLLECTED
//! COLLECTED --INSPECTION--> IN_PROCESS --...processing...--> IN_PROCESS
//! IN_PROCESS --CLASSIFICATION--> PROCESSED --CUSTODY_TRANSFER--> PROCESSED
//! PROCESSED --SALE|DONATION--> FINALIZED
//! ```
//!
//! Classification needs INSPECTION, PHYSICAL_CONDITION_ANALYSIS, DATA_WIPE and
//! a passing FUNCTIONAL_TEST recorded after the last REPAIR or
//! COMPONENT_REPLACEMENT. SALE and DONATION always need a prior DATA_WIPE.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::types::{Classification, DeviceState, EventType, ProcessEvent, Role, TestResult};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransitionError {
    Terminal,
    State { state: DeviceState, event: EventType },
    InspectionFirst { event: EventType },
    MissingWipe { event: EventType },
    MissingSteps { missing: Vec<EventType> },
    UntestedRepair,
    RecycledReserved,
}

impl fmt::Display for TransitionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransitionError::Terminal => f.write_str("device is finalized"),
            TransitionError::State { state, event } => write!(f, "{event} not allowed in state {state}"),
            TransitionError::InspectionFirst { event } => write!(f, "{event} requires a prior INSPECTION"),
            TransitionError::MissingWipe { event } => write!(f, "{event} requires a prior DATA_WIPE"),
            TransitionError::MissingSteps { missing } => {
                let names: Vec<_> = missing.iter().map(|e| e.as_str()).collect();
                write!(f, "classification missing steps: {}", names.join(", "))
            }
            TransitionError::UntestedRepair => {
                f.write_str("no passing FUNCTIONAL_TEST after the last repair or replacement")
            }
            TransitionError::RecycledReserved => f.write_str("the recycling path is not supported"),
        }
    }
}

fn has(history: &[ProcessEvent], event: EventType) -> bool {
    history.iter().any(|e| e.event_type == event)
}

/// Checks the classification preconditions against a device history.
pub fn classification_ready(history: &[ProcessEvent]) -> Result<(), TransitionError> {
    if !has(history, EventType::DataWipe) {
        return Err(TransitionError::MissingWipe {
            event: EventType::Classification,
        });
    }
    let missing: Vec<EventType> = [EventType::Inspection, EventType::PhysicalConditionAnalysis]
        .into_iter()
        .filter(|e| !has(history, *e))
        .collect();
    if !missing.is_empty() {
        return Err(TransitionError::MissingSteps { missing });
    }
    let last_fix = history
        .iter()
        .rposition(|e| matches!(e.event_type, EventType::Repair | EventType::ComponentReplacement));
    let after = last_fix.map_or(0, |i| i + 1);
    let tested = history[after..]
        .iter()
        .any(|e| e.event_type == EventType::FunctionalTest && e.result == TestResult::Pass);
    if tested {
        Ok(())
    } else if has(history, EventType::FunctionalTest) || last_fix.is_some() {
        Err(TransitionError::UntestedRepair)
    } else {
        Err(TransitionError::MissingSteps {
            missing: vec![EventType::FunctionalTest],
        })
    }
}

/// Validates `event` against the device's current state and history.
pub fn check(
    state: DeviceState,
    history: &[ProcessEvent],
    event: EventType,
    classification: Classification,
) -> Result<(), TransitionError> {
    use DeviceState::*;
    if state == Finalized {
        return Err(TransitionError::Terminal);
    }
    let wrong_state = || TransitionError::State { state, event };
    match event {
        EventType::Collection => (state == Registered).then_some(()).ok_or_else(wrong_state),
        EventType::CustodyTransfer => matches!(state, Collected | InTransit | Processed)
            .then_some(())
            .ok_or_else(wrong_state),
        EventType::Inspection => matches!(state, Collected | InProcess)
            .then_some(())
            .ok_or_else(wrong_state),
        e if e.is_processing() => match state {
            InProcess => Ok(()),
            Collected => Err(TransitionError::InspectionFirst { event }),
            _ => Err(wrong_state()),
        },
        EventType::Classification => {
            if classification == Classification::Recycled {
                return Err(TransitionError::RecycledReserved);
            }
            if state != InProcess {
                return Err(wrong_state());
            }
            classification_ready(history)
        }
        EventType::Sale | EventType::Donation => {
            if !has(history, EventType::DataWipe) {
                return Err(TransitionError::MissingWipe { event });
            }
            (state == Processed).then_some(()).ok_or_else(wrong_state)
        }
        _ => unreachable!("all event types handled"),
    }
}

/// State after `event` is applied. Total, so audits can keep replaying past
/// a violation.
pub fn next_state(current: DeviceState, event: EventType, target_role: Option<Role>) -> DeviceState {
    use DeviceState::*;
    match event {
        EventType::Collection => Collected,
        EventType::CustodyTransfer => match current {
            Processed | Finalized => current,
            _ if target_role == Some(Role::ThirdPartyLogistics) => InTransit,
            _ => Collected,
        },
        EventType::Classification => Processed,
        EventType::Sale | EventType::Donation => Finalized,
        _ => InProcess,
    }
}
