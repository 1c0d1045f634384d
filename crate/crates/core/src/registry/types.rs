use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::crypto::PublicKeyId;
use crate::hash::Hash256;

/// Declares a `u8`-tagged wire enum with its canonical upper-case names.
macro_rules! wire_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident = $tag:literal => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant = $tag),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn tag(self) -> u8 {
                self as u8
            }

            pub fn from_tag(tag: u8) -> Option<Self> {
                match tag {
                    $($tag => Some($name::$variant),)+
                    _ => None,
                }
            }

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                let wanted = s.trim().to_ascii_uppercase().replace('-', "_");
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.as_str() == wanted)
                    .ok_or_else(|| format!("unknown {} '{}'", stringify!($name), s))
            }
        }
    };
}

wire_enum!(
    /// Reverse-logistics actor roles.
    Role {
        Customer = 1 => "CUSTOMER",
        Retailer = 2 => "RETAILER",
        Manufacturer = 3 => "MANUFACTURER",
        ThirdPartyLogistics = 4 => "THIRD_PARTY_LOGISTICS",
        Government = 5 => "GOVERNMENT",
        Refurbisher = 6 => "REFURBISHER",
    }
);

wire_enum!(
    ComponentType {
        Cpu = 1 => "CPU",
        Camera = 2 => "CAMERA",
        Battery = 3 => "BATTERY",
        Display = 4 => "DISPLAY",
        InternalMemory = 5 => "INTERNAL_MEMORY",
        Motherboard = 6 => "MOTHERBOARD",
    }
);

wire_enum!(
    DeviceState {
        Registered = 1 => "REGISTERED",
        Collected = 2 => "COLLECTED",
        InTransit = 3 => "IN_TRANSIT",
        InProcess = 4 => "IN_PROCESS",
        Processed = 5 => "PROCESSED",
        Finalized = 6 => "FINALIZED",
    }
);

wire_enum!(
    /// `Recycled` is reserved; every attempt to classify into it is rejected.
    Classification {
        None = 0 => "NONE",
        Remanufactured = 1 => "REMANUFACTURED",
        Refurbished = 2 => "REFURBISHED",
        Recycled = 3 => "RECYCLED",
    }
);

wire_enum!(
    Disposition {
        None = 0 => "NONE",
        SoldSecondary = 1 => "SOLD_SECONDARY",
        Donated = 2 => "DONATED",
    }
);

wire_enum!(
    EventType {
        Collection = 1 => "COLLECTION",
        CustodyTransfer = 2 => "CUSTODY_TRANSFER",
        Inspection = 3 => "INSPECTION",
        PhysicalConditionAnalysis = 4 => "PHYSICAL_CONDITION_ANALYSIS",
        DataWipe = 5 => "DATA_WIPE",
        FunctionalTest = 6 => "FUNCTIONAL_TEST",
        CustomizationRemoval = 7 => "CUSTOMIZATION_REMOVAL",
        Repair = 8 => "REPAIR",
        ComponentReplacement = 9 => "COMPONENT_REPLACEMENT",
        Classification = 10 => "CLASSIFICATION",
        Sale = 11 => "SALE",
        Donation = 12 => "DONATION",
    }
);

wire_enum!(
    TestResult {
        Na = 0 => "NA",
        Pass = 1 => "PASS",
        Fail = 2 => "FAIL",
    }
);

impl EventType {
    /// Steps performed on a device while it is `IN_PROCESS`.
    pub fn is_processing(self) -> bool {
        matches!(
            self,
            EventType::Inspection
                | EventType::PhysicalConditionAnalysis
                | EventType::DataWipe
                | EventType::FunctionalTest
                | EventType::CustomizationRemoval
                | EventType::Repair
                | EventType::ComponentReplacement
        )
    }

    /// Events that move custody to a new holder.
    pub fn moves_custody(self) -> bool {
        matches!(
            self,
            EventType::Collection
                | EventType::CustodyTransfer
                | EventType::Sale
                | EventType::Donation
        )
    }
}

/// One entry of a device's bill of materials as submitted on-chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub component_type: ComponentType,
    pub serial: String,
    pub feature_info_hash: Hash256,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentRecord {
    pub component_type: ComponentType,
    pub serial: String,
    pub feature_info_hash: Hash256,
    pub installed: bool,
}

impl From<&ComponentSpec> for ComponentRecord {
    fn from(spec: &ComponentSpec) -> Self {
        ComponentRecord {
            component_type: spec.component_type,
            serial: spec.serial.clone(),
            feature_info_hash: spec.feature_info_hash,
            installed: true,
        }
    }
}

/// Swap of one installed component for a new one of the same type.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replacement {
    pub removed_serial: String,
    pub installed: ComponentSpec,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StakeholderRecord {
    pub id: PublicKeyId,
    pub role: Role,
    pub display_name: String,
    pub registered_at: u64,
    pub active: bool,
    pub toc_state: Option<TocAnchor>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceRecord {
    pub serial: String,
    pub model: String,
    pub original_manufacturer: PublicKeyId,
    pub components: Vec<ComponentRecord>,
    pub state: DeviceState,
    pub classification: Classification,
    pub disposition: Disposition,
    pub custodian: PublicKeyId,
    pub event_count: u64,
}

impl DeviceRecord {
    pub fn installed(&self, component_type: ComponentType) -> impl Iterator<Item = &ComponentRecord> {
        self.components
            .iter()
            .filter(move |c| c.installed && c.component_type == component_type)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessEvent {
    pub event_type: EventType,
    pub device_serial: String,
    pub actor: PublicKeyId,
    pub counterparty: Option<PublicKeyId>,
    pub result: TestResult,
    pub detail_hash: Hash256,
    pub classification: Classification,
    pub replacement: Option<Replacement>,
    pub seq: u64,
    pub block_height: u64,
}

/// On-chain commitment to a prefix of a stakeholder's table of contents.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TocAnchor {
    pub stakeholder: PublicKeyId,
    pub toc_length: u64,
    pub toc_root: Hash256,
    pub anchored_at: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_roundtrip_and_reject_unknown() {
        for e in EventType::ALL {
            assert_eq!(EventType::from_tag(e.tag()), Some(*e));
        }
        assert_eq!(EventType::ALL.len(), 12);
        assert_eq!(Role::ALL.len(), 6);
        assert_eq!(ComponentType::ALL.len(), 6);
        assert_eq!(EventType::from_tag(0), None);
        assert_eq!(EventType::from_tag(13), None);
    }

    #[test]
    fn parse_is_case_and_dash_insensitive() {
        assert_eq!("data-wipe".parse::<EventType>(), Ok(EventType::DataWipe));
        assert_eq!("third_party_logistics".parse::<Role>(), Ok(Role::ThirdPartyLogistics));
        assert!("nope".parse::<Role>().is_err());
    }

    #[test]
    fn serde_uses_wire_names() {
        let s = serde_json::to_string(&EventType::PhysicalConditionAnalysis).unwrap();
        assert_eq!(s, "\"PHYSICAL_CONDITION_ANALYSIS\"");
    }
}
