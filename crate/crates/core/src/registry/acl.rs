//! Role x event permission matrix.
//!
//! | event                         | roles allowed to record it                    |
//! |-------------------------------|-----------------------------------------------|
//! | COLLECTION                    | RETAILER                                      |
//! | CUSTODY_TRANSFER              | RETAILER, THIRD_PARTY_LOGISTICS, MANUFACTURER, REFURBISHER |
//! | processing steps              | MANUFACTURER, REFURBISHER, RETAILER           |
//! | CLASSIFICATION                | MANUFACTURER, REFURBISHER, RETAILER (REMANUFACTURED: original manufacturer only) |
//! | SALE, DONATION                | RETAILER, MANUFACTURER, REFURBISHER           |
//!
//! CUSTOMER and GOVERNMENT record nothing.

use super::types::{EventType, Role};

pub fn role_permits(role: Role, event: EventType) -> bool {
    use EventType::*;
    use Role::*;
    match event {
        Collection => role == Retailer,
        CustodyTransfer => matches!(role, Retailer | ThirdPartyLogistics | Manufacturer | Refurbisher),
        Inspection | PhysicalConditionAnalysis | DataWipe | FunctionalTest | CustomizationRemoval
        | Repair | ComponentReplacement => matches!(role, Manufacturer | Refurbisher | Retailer),
        Classification => matches!(role, Manufacturer | Refurbisher | Retailer),
        Sale | Donation => matches!(role, Retailer | Manufacturer | Refurbisher),
    }
}

pub fn may_register_device(role: Role) -> bool {
    matches!(role, Role::Manufacturer | Role::Retailer)
}

/// Roles that can hold a device in custody through a transfer.
pub fn may_hold_custody(role: Role) -> bool {
    matches!(
        role,
        Role::Retailer | Role::ThirdPartyLogistics | Role::Manufacturer | Role::Refurbisher
    )
}

/// The matrix rendered as machine-readable TOML, one key per event type.
pub fn matrix_toml() -> String {
    let mut out = String::from("# role x event permission matrix\n[events]\n");
    for event in EventType::ALL {
        let roles: Vec<String> = Role::ALL
            .iter()
            .filter(|r| role_permits(**r, *event))
            .map(|r| format!("\"{r}\""))
            .collect();
        out.push_str(&format!("{event} = [{}]\n", roles.join(", ")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn readers_never_write() {
        for e in EventType::ALL {
            assert!(!role_permits(Role::Customer, *e));
            assert!(!role_permits(Role::Government, *e));
        }
    }

    #[test]
    fn logistics_only_moves_custody() {
        let allowed: Vec<_> = EventType::ALL
            .iter()
            .filter(|e| role_permits(Role::ThirdPartyLogistics, **e))
            .collect();
        assert_eq!(allowed, vec![&EventType::CustodyTransfer]);
    }

    #[test]
    fn matrix_toml_lists_every_event() {
        let t = matrix_toml();
        for e in EventType::ALL {
            assert!(t.contains(e.as_str()));
        }
        assert!(t.contains("COLLECTION = [\"RETAILER\"]"));
    }
}
