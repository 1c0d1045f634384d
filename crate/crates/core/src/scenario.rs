//! Deterministic demo fixture.
//!
//! Builds a small chain in which a phone is collected from a customer by a
//! retailer, shipped through a logistics provider to a refurbisher,
//! processed, returned to the retailer and sold. Every event has a JSON
//! record in the actor's off-chain store, and every actor anchors its TOC.
//!
//! Blocks are assembled directly rather than through [`crate::Ledger`], so
//! a [`Fault`] can put rule-breaking or forged transactions on-chain for
//! the auditor to find.

use std::collections::BTreeMap;
use std::path::Path;

use crate::block::Block;
use crate::crypto::{Keypair, PublicKeyId};
use crate::genesis::GenesisConfig;
use crate::hash::Hash256;
use crate::offchain::{OffchainError, OffchainStore};
use crate::registry::types::{Classification, ComponentSpec, ComponentType, EventType, Role, TestResult};
use crate::tx::{EventPayload, Payload, Transaction};

pub const DEMO_CHAIN_ID: u64 = 7;
pub const DEMO_GENESIS_TIME: u64 = 1_700_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// The refurbisher never records DATA_WIPE.
    SkipWipe,
    /// The refurbisher's DATA_WIPE record is altered after anchoring.
    TamperRecord,
    /// The logistics handoff to the refurbisher carries a corrupted signature.
    ForgeSignature,
}

fn seeded(name: &str) -> Keypair {
    Keypair::from_secret(Hash256::digest(format!("rltrace/demo/{name}").as_bytes()).0)
}

/// Fixed keys for every demo participant.
#[derive(Clone, Debug)]
pub struct Cast {
    /// Genesis validator and registrar.
    pub operator: Keypair,
    pub customer: Keypair,
    pub retailer: Keypair,
    pub manufacturer: Keypair,
    pub logistics: Keypair,
    pub refurbisher: Keypair,
    /// Secondary-market buyer. Never registered.
    pub buyer: Keypair,
}

impl Cast {
    pub fn seeded() -> Self {
        Cast {
            operator: seeded("operator"),
            customer: seeded("customer"),
            retailer: seeded("retailer"),
            manufacturer: seeded("manufacturer"),
            logistics: seeded("logistics"),
            refurbisher: seeded("refurbisher"),
            buyer: seeded("buyer"),
        }
    }

    /// Registered participants with their role and display name.
    pub fn stakeholders(&self) -> [(&Keypair, Role, &'static str); 5] {
        [
            (&self.customer, Role::Customer, "customer"),
            (&self.retailer, Role::Retailer, "retailer"),
            (&self.manufacturer, Role::Manufacturer, "manufacturer"),
            (&self.logistics, Role::ThirdPartyLogistics, "logistics"),
            (&self.refurbisher, Role::Refurbisher, "refurbisher"),
        ]
    }

    pub fn genesis(&self) -> GenesisConfig {
        let op = self.operator.public();
        let mut g = GenesisConfig::new(DEMO_CHAIN_ID, vec![op], vec![op]);
        g.genesis_time = DEMO_GENESIS_TIME;
        g
    }
}

/// Bill of materials with serials derived from the device serial.
pub fn demo_components(serial: &str) -> Vec<ComponentSpec> {
    ComponentType::ALL
        .iter()
        .map(|t| ComponentSpec {
            component_type: *t,
            serial: format!("{serial}-{}", t.as_str()),
            feature_info_hash: Hash256::digest(format!("{serial}/{t}").as_bytes()),
        })
        .collect()
}

/// A stored event record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecordRef {
    pub owner: PublicKeyId,
    pub serial: String,
    pub event_type: EventType,
    pub address: Hash256,
}

pub struct Demo {
    pub cast: Cast,
    pub genesis: GenesisConfig,
    pub blocks: Vec<Block>,
    pub stores: Vec<OffchainStore>,
    /// First device serial.
    pub serial: String,
    pub serials: Vec<String>,
    pub records: Vec<RecordRef>,
}

struct Builder {
    cast: Cast,
    genesis: GenesisConfig,
    blocks: Vec<Block>,
    nonces: BTreeMap<PublicKeyId, u64>,
    stores: BTreeMap<PublicKeyId, OffchainStore>,
    anchored: BTreeMap<PublicKeyId, u64>,
    records: Vec<RecordRef>,
}

impl Builder {
    fn new(root: &Path) -> Result<Self, OffchainError> {
        let cast = Cast::seeded();
        let genesis = cast.genesis();
        let mut stores = BTreeMap::new();
        for (key, _, name) in cast.stakeholders() {
            stores.insert(key.public(), OffchainStore::open(&root.join(name))?);
        }
        Ok(Builder {
            blocks: vec![Block::genesis(&genesis)],
            cast,
            genesis,
            nonces: BTreeMap::new(),
            stores,
            anchored: BTreeMap::new(),
            records: Vec::new(),
        })
    }

    fn sign(&mut self, who: &Keypair, payload: Payload) -> Transaction {
        let nonce = self.nonces.entry(who.public()).or_insert(0);
        *nonce += 1;
        Transaction::sign(payload, *nonce, who, self.genesis.chain_id).expect("demo payloads fit the codec limits")
    }

    fn commit(&mut self, txs: Vec<Transaction>) {
        let prev = self.blocks.last().unwrap();
        let height = prev.height() + 1;
        let block = Block::assemble(
            height,
            prev.hash(),
            DEMO_GENESIS_TIME + height * 5,
            txs,
            &self.cast.operator,
            self.genesis.chain_id,
        )
        .expect("demo block encodes");
        self.blocks.push(block);
    }

    /// Stores a record for the event and returns the signed transaction.
    fn event(&mut self, who: &Keypair, mut ev: EventPayload, note: &str) -> Result<Transaction, OffchainError> {
        let owner = who.public();
        let body = serde_json::json!({
            "serial": ev.device_serial,
            "event": ev.event_type.as_str(),
            "actor": owner.to_hex(),
            "note": note,
        });
        let store = &self.stores[&owner];
        let key = format!("{}/{}", ev.device_serial, ev.event_type.as_str());
        let entry = store.put_and_list(who, &key, body.to_string().as_bytes())?;
        ev.detail_hash = entry.content_hash;
        self.records.push(RecordRef {
            owner,
            serial: ev.device_serial.clone(),
            event_type: ev.event_type,
            address: entry.content_hash,
        });
        Ok(self.sign(who, Payload::RecordEvent(ev)))
    }

    fn onboard(&mut self) {
        let op = self.cast.operator.clone();
        let txs: Vec<Transaction> = self
            .cast
            .stakeholders()
            .map(|(k, role, name)| (k.public(), role, name))
            .into_iter()
            .map(|(candidate, role, name)| {
                self.sign(
                    &op,
                    Payload::RegisterStakeholder {
                        candidate,
                        role,
                        display_name: name.to_owned(),
                    },
                )
            })
            .collect();
        self.commit(txs);
    }

    fn anchor_all(&mut self) -> Result<(), OffchainError> {
        let mut txs = Vec::new();
        let keys: Vec<Keypair> = self.cast.stakeholders().iter().map(|(k, _, _)| (*k).clone()).collect();
        for key in keys {
            let id = key.public();
            let anchored = self.anchored.get(&id).copied().unwrap_or(0);
            let draft = match self.stores[&id].anchor_draft(&id, anchored) {
                Ok(d) => d,
                Err(OffchainError::NoProgress { .. }) => continue,
                Err(e) => return Err(e),
            };
            self.anchored.insert(id, draft.toc_length);
            txs.push(self.sign(
                &key,
                Payload::AnchorToc {
                    toc_length: draft.toc_length,
                    toc_root: draft.toc_root,
                },
            ));
        }
        if !txs.is_empty() {
            self.commit(txs);
        }
        Ok(())
    }

    fn pipeline(&mut self, serial: &str, fault: Option<Fault>) -> Result<(), OffchainError> {
        let c = self.cast.clone();
        let (retailer, logistics, refurb) = (&c.retailer, &c.logistics, &c.refurbisher);
        let reg = self.sign(
            &c.manufacturer,
            Payload::RegisterDevice {
                serial: serial.to_owned(),
                model: "Phone X2".into(),
                original_manufacturer: c.manufacturer.public(),
                components: demo_components(serial),
            },
        );
        self.commit(vec![reg]);

        let ev = |t: EventType| EventPayload::new(t, serial, Hash256::ZERO);
        let tx = self.event(
            retailer,
            ev(EventType::Collection).with_counterparty(c.customer.public()),
            "collected at store counter",
        )?;
        self.commit(vec![tx]);
        let tx = self.event(
            retailer,
            ev(EventType::CustodyTransfer).with_counterparty(logistics.public()),
            "handed to courier",
        )?;
        self.commit(vec![tx]);
        let mut tx = self.event(
            logistics,
            ev(EventType::CustodyTransfer).with_counterparty(refurb.public()),
            "delivered to refurbisher",
        )?;
        if fault == Some(Fault::ForgeSignature) {
            tx.signature.0[0] ^= 0x01;
        }
        self.commit(vec![tx]);

        let tx = self.event(refurb, ev(EventType::Inspection), "visual inspection")?;
        self.commit(vec![tx]);
        let tx = self.event(refurb, ev(EventType::PhysicalConditionAnalysis), "grade B housing")?;
        self.commit(vec![tx]);
        if fault != Some(Fault::SkipWipe) {
            let tx = self.event(refurb, ev(EventType::DataWipe), "NIST 800-88 purge, verified")?;
            self.commit(vec![tx]);
        }
        let tx = self.event(
            refurb,
            ev(EventType::FunctionalTest).with_result(TestResult::Pass),
            "all functions pass",
        )?;
        self.commit(vec![tx]);
        let tx = self.event(
            refurb,
            ev(EventType::Classification).with_classification(Classification::Refurbished),
            "refurbished",
        )?;
        self.commit(vec![tx]);
        let tx = self.event(
            refurb,
            ev(EventType::CustodyTransfer).with_counterparty(retailer.public()),
            "returned for resale",
        )?;
        self.commit(vec![tx]);
        let tx = self.event(
            retailer,
            ev(EventType::Sale).with_counterparty(c.buyer.public()),
            "sold refurbished",
        )?;
        self.commit(vec![tx]);
        self.anchor_all()
    }
}

impl Demo {
    /// One device through the full refurbishment pipeline.
    pub fn build(store_root: &Path, fault: Option<Fault>) -> Result<Demo, OffchainError> {
        Demo::build_many(store_root, fault, 1)
    }

    /// `devices` devices in sequence; a fault applies to the first only.
    pub fn build_many(store_root: &Path, fault: Option<Fault>, devices: usize) -> Result<Demo, OffchainError> {
        let mut b = Builder::new(store_root)?;
        b.onboard();
        let serials: Vec<String> = (1..=devices.max(1)).map(|i| format!("IMEI-35000000000{i:04}")).collect();
        for (i, serial) in serials.iter().enumerate() {
            b.pipeline(serial, if i == 0 { fault } else { None })?;
        }
        let mut demo = Demo {
            serial: serials[0].clone(),
            serials,
            cast: b.cast,
            genesis: b.genesis,
            blocks: b.blocks,
            stores: b.stores.into_values().collect(),
            records: b.records,
        };
        if fault == Some(Fault::TamperRecord) {
            demo.tamper(EventType::DataWipe)?;
        }
        Ok(demo)
    }

    pub fn record_of(&self, event_type: EventType) -> Option<Hash256> {
        self.records
            .iter()
            .find(|r| r.serial == self.serial && r.event_type == event_type)
            .map(|r| r.address)
    }

    pub fn store_of(&self, owner: &PublicKeyId) -> Option<&OffchainStore> {
        self.stores.iter().find(|s| s.has_toc(owner))
    }

    /// Overwrites the first device's record for `event_type` in place.
    pub fn tamper(&mut self, event_type: EventType) -> Result<(), OffchainError> {
        let r = self
            .records
            .iter()
            .find(|r| r.serial == self.serial && r.event_type == event_type)
            .ok_or_else(|| OffchainError::NotFound(format!("{event_type} record")))?;
        let store = self
            .store_of(&r.owner)
            .ok_or_else(|| OffchainError::NotFound("owner store".into()))?;
        let path = store.cas().path_for(&r.address);
        let mut bytes = std::fs::read(&path)?;
        bytes.extend_from_slice(b" (edited)");
        std::fs::write(path, bytes)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::Ledger;
    use crate::registry::types::DeviceState;

    #[test]
    fn honest_demo_imports_into_a_ledger() {
        let dir = tempfile::tempdir().unwrap();
        let demo = Demo::build_many(dir.path(), None, 2).unwrap();
        let ledger = Ledger::from_blocks(demo.genesis.clone(), demo.blocks.clone()).unwrap();
        for s in &demo.serials {
            assert_eq!(ledger.registry().device(s).unwrap().state, DeviceState::Finalized);
        }
        assert!(crate::verify::verify_chain(&demo.blocks, &demo.genesis).valid);
    }

    #[test]
    fn demo_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let da = Demo::build(a.path(), None).unwrap();
        let db = Demo::build(b.path(), None).unwrap();
        assert_eq!(da.blocks, db.blocks);
    }

    #[test]
    fn skipped_wipe_is_rejected_by_a_ledger() {
        let dir = tempfile::tempdir().unwrap();
        let demo = Demo::build(dir.path(), Some(Fault::SkipWipe)).unwrap();
        assert!(Ledger::from_blocks(demo.genesis.clone(), demo.blocks.clone()).is_err());
    }
}
