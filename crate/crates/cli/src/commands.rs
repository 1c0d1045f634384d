use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use rltrace_core::offchain::{OffchainError, OffchainStore};
use rltrace_core::registry::types::{Classification, ComponentSpec, ComponentType, EventType, Replacement};
use rltrace_core::scenario::demo_components;
use rltrace_core::tx::{EventPayload, Payload};
use rltrace_core::{GenesisConfig, Hash256, Keypair, PublicKeyId, Transaction};
use rltrace_node::api::TxState;
use rltrace_node::client::Client;
use rltrace_node::NodeConfig;
use serde_json::json;

use crate::exit::Failure;
use crate::keystore::Keystore;
use crate::render;
use crate::{AnchorMode, Cli, Command, Global, NodeArgs, Output, RecordArgs};

pub const RECORD_SCHEMA: &str = "rltrace.record/1";

struct Ctx {
    g: Global,
    client: Client,
    keys: Keystore,
    chain_id: Option<u64>,
}

struct Signer {
    name: String,
    key: Keypair,
    store: PathBuf,
}

/// Outcome of one submitted transaction.
struct Sent {
    hash: Hash256,
    block_height: Option<u64>,
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    let keys = Keystore::new(cli.global.keystore.clone().unwrap_or_else(|| cli.global.home.join("keys")));
    let mut ctx = Ctx {
        client: Client::new(&cli.global.node),
        g: cli.global,
        keys,
        chain_id: None,
    };
    match cli.command {
        Command::Node(args) => node(args),
        Command::Genesis {
            chain_id,
            validators,
            registrars,
            genesis_time,
            out,
        } => ctx.genesis(chain_id, &validators, &registrars, genesis_time, &out),
        Command::Keygen { name } => {
            let key = ctx.keys.generate(&name)?;
            ctx.print(&json!({"name": name, "id": key.public()}), || format!("{name} {}", key.public()));
            Ok(())
        }
        Command::Keys => {
            let list = ctx.keys.list()?;
            let v: Vec<_> = list.iter().map(|(n, id)| json!({"name": n, "id": id})).collect();
            ctx.print(&json!(v), || list.iter().map(|(n, id)| format!("{n} {id}\n")).collect());
            Ok(())
        }
        Command::RegisterStakeholder { signer, id, role, name } => {
            let s = ctx.signer(&signer)?;
            let candidate = ctx.keys.resolve(&id)?;
            let payload = Payload::RegisterStakeholder {
                candidate,
                role,
                display_name: name.clone(),
            };
            let sent = ctx.send(&s, payload)?;
            ctx.report(&sent, &format!("registered {name} ({role}) as {}", candidate.short()));
            Ok(())
        }
        Command::SetActive { signer, id, active } => {
            let s = ctx.signer(&signer)?;
            let stakeholder = ctx.keys.resolve(&id)?;
            let sent = ctx.send(&s, Payload::SetStakeholderActive { stakeholder, active })?;
            ctx.report(&sent, &format!("{} active={active}", stakeholder.short()));
            Ok(())
        }
        Command::RegisterDevice {
            signer,
            serial,
            model,
            manufacturer,
            components,
        } => {
            let s = ctx.signer(&signer)?;
            let original_manufacturer = match manufacturer {
                Some(m) => ctx.keys.resolve(&m)?,
                None => s.key.public(),
            };
            let components = if components.is_empty() {
                demo_components(&serial)
            } else {
                components.iter().map(|c| parse_component(c)).collect::<Result<_, _>>()?
            };
            let sent = ctx.send(
                &s,
                Payload::RegisterDevice {
                    serial: serial.clone(),
                    model,
                    original_manufacturer,
                    components,
                },
            )?;
            ctx.report(&sent, &format!("registered device {serial}"));
            Ok(())
        }
        Command::RecordEvent {
            signer,
            event_type,
            serial,
            counterparty,
            result,
            classification,
            remove,
            install,
            record,
        } => {
            let mut ev = EventPayload::new(event_type, serial, Hash256::ZERO).with_result(result);
            if let Some(c) = counterparty {
                ev = ev.with_counterparty(ctx.keys.resolve(&c)?);
            }
            if let Some(c) = classification {
                ev = ev.with_classification(c);
            }
            match (remove, install) {
                (None, None) => {}
                (Some(removed_serial), Some(spec)) => {
                    ev = ev.with_replacement(Replacement {
                        removed_serial,
                        installed: parse_component(&spec)?,
                    })
                }
                _ => return Err(Failure::Usage("--remove and --install go together".into())),
            }
            ctx.event(&signer, ev, &record)
        }
        Command::Classify {
            signer,
            serial,
            classification,
            record,
        } => {
            let ev = EventPayload::new(EventType::Classification, serial, Hash256::ZERO).with_classification(classification);
            ctx.event(&signer, ev, &record)
        }
        Command::Transfer { signer, serial, to, record } => {
            let ev = EventPayload::new(EventType::CustodyTransfer, serial, Hash256::ZERO).with_counterparty(ctx.keys.resolve(&to)?);
            ctx.event(&signer, ev, &record)
        }
        Command::Sell {
            signer,
            serial,
            buyer,
            record,
        } => {
            let ev = EventPayload::new(EventType::Sale, serial, Hash256::ZERO).with_counterparty(ctx.keys.resolve(&buyer)?);
            ctx.event(&signer, ev, &record)
        }
        Command::Donate { signer, serial, to, record } => {
            let ev = EventPayload::new(EventType::Donation, serial, Hash256::ZERO).with_counterparty(ctx.keys.resolve(&to)?);
            ctx.event(&signer, ev, &record)
        }
        Command::AnchorToc { signer } => {
            let s = ctx.signer(&signer)?;
            match ctx.anchor(&s)? {
                Some((sent, length)) => ctx.report(&sent, &format!("anchored {} TOC entries of {}", length, s.name)),
                None => ctx.print(&json!({"anchored": null}), || format!("nothing new to anchor for {}\n", s.name)),
            }
            Ok(())
        }
        Command::Trace { serial } => {
            let h = ctx.client.history(&serial)?;
            ctx.print(&h, || render::history(&h));
            Ok(())
        }
        Command::Audit { serial: Some(serial), .. } => {
            let r = ctx.client.compliance(&serial)?;
            ctx.print(&r, || r.report.render_text());
            if r.report.is_compliant() {
                Ok(())
            } else {
                Err(Failure::Verdict(r.report.verdict))
            }
        }
        Command::Audit { serial: None, .. } => {
            let r = ctx.client.audit()?;
            ctx.print(&r, || r.report.render_text());
            if r.report.compliant {
                Ok(())
            } else {
                Err(Failure::SystemNonCompliant)
            }
        }
        Command::Verify => {
            let r = ctx.client.verify_chain()?;
            ctx.print(&r, || r.report.to_string());
            if r.report.valid {
                Ok(())
            } else {
                Err(Failure::ChainInvalid)
            }
        }
        Command::Stats { stakeholder } => {
            let id = ctx.keys.resolve(&stakeholder)?;
            let r = ctx.client.stats(&id)?;
            ctx.print(&r, || render::stats(&r));
            Ok(())
        }
        Command::Status => {
            let r = ctx.client.status()?;
            ctx.print(&r, || render::status(&r));
            Ok(())
        }
    }
}

fn node(args: NodeArgs) -> Result<(), Failure> {
    let mut cfg = match &args.config {
        Some(path) => NodeConfig::load(path).map_err(|e| Failure::Usage(e.to_string()))?,
        None => {
            let (Some(data), Some(genesis)) = (&args.data_dir, &args.genesis) else {
                return Err(Failure::Usage("node needs --config, or --data-dir and --genesis".into()));
            };
            NodeConfig::new(data, genesis)
        }
    };
    if let Some(v) = args.listen {
        cfg.listen = v;
    }
    if let Some(v) = args.data_dir {
        cfg.data_dir = v;
    }
    if let Some(v) = args.genesis {
        cfg.genesis = v;
    }
    if let Some(v) = args.validator_key {
        cfg.validator_key = Some(v);
    }
    if let Some(v) = args.seal_interval_ms {
        cfg.seal_interval_ms = v;
    }
    cfg.allow_empty |= args.allow_empty;
    cfg.record_stores.extend(args.record_stores);

    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    rltrace_node::serve(cfg).map_err(|e| Failure::Other(e.to_string()))
}

/// TYPE:SERIAL[:FEATURE_HASH_HEX]. A missing feature hash is derived from
/// the serial.
fn parse_component(s: &str) -> Result<ComponentSpec, Failure> {
    let mut parts = s.splitn(3, ':');
    let (Some(t), Some(serial)) = (parts.next(), parts.next()) else {
        return Err(Failure::Usage(format!("component {s:?} is not TYPE:SERIAL[:HASH]")));
    };
    let component_type: ComponentType = t.parse().map_err(Failure::Usage)?;
    let feature_info_hash = match parts.next() {
        Some(h) => Hash256::from_hex(h).map_err(|e| Failure::Usage(format!("component hash: {e}")))?,
        None => Hash256::digest(format!("{serial}/{component_type}").as_bytes()),
    };
    Ok(ComponentSpec {
        component_type,
        serial: serial.to_string(),
        feature_info_hash,
    })
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl Ctx {
    fn json(&self) -> bool {
        self.g.output == Output::Json
    }

    fn print<T: serde::Serialize>(&self, value: &T, text: impl FnOnce() -> String) {
        if self.json() {
            println!("{}", serde_json::to_string_pretty(value).expect("response serializes"));
        } else {
            let t = text();
            print!("{t}");
            if !t.ends_with('\n') {
                println!();
            }
        }
    }

    fn report(&self, sent: &Sent, what: &str) {
        let v = json!({
            "tx_hash": sent.hash,
            "state": if sent.block_height.is_some() { "committed" } else { "pending" },
            "block_height": sent.block_height,
        });
        self.print(&v, || match sent.block_height {
            Some(h) => format!("{what}: committed in block {h} (tx {})", sent.hash),
            None => format!("{what}: submitted (tx {})", sent.hash),
        });
    }

    fn signer(&self, name: &str) -> Result<Signer, Failure> {
        let key = self.keys.load(name)?;
        let store = self.g.store.clone().unwrap_or_else(|| self.g.home.join("stores").join(name));
        Ok(Signer {
            name: name.to_string(),
            key,
            store,
        })
    }

    fn chain_id(&mut self) -> Result<u64, Failure> {
        if let Some(id) = self.chain_id {
            return Ok(id);
        }
        let id = self.client.status()?.chain_id;
        self.chain_id = Some(id);
        Ok(id)
    }

    fn nonce_path(&self, id: &PublicKeyId) -> PathBuf {
        self.g.home.join("nonces").join(id.to_hex())
    }

    /// Above both the last committed nonce and the last one this home
    /// submitted, so back-to-back `--no-wait` commands do not collide.
    fn next_nonce(&self, id: &PublicKeyId) -> Result<u64, Failure> {
        let committed = self.client.nonce(id)?;
        let local = std::fs::read_to_string(self.nonce_path(id))
            .ok()
            .and_then(|s| s.trim().parse::<u64>().ok())
            .unwrap_or(0);
        Ok(committed.max(local) + 1)
    }

    fn remember_nonce(&self, id: &PublicKeyId, nonce: u64) -> Result<(), Failure> {
        let path = self.nonce_path(id);
        std::fs::create_dir_all(path.parent().expect("nonce path has a parent"))?;
        std::fs::write(path, format!("{nonce}\n"))?;
        Ok(())
    }

    fn send(&mut self, s: &Signer, payload: Payload) -> Result<Sent, Failure> {
        let chain_id = self.chain_id()?;
        let nonce = self.next_nonce(&s.key.public())?;
        let tx = Transaction::sign(payload, nonce, &s.key, chain_id).map_err(|e| Failure::Usage(e.to_string()))?;
        let resp = self.client.submit(&tx)?;
        if !resp.accepted {
            return Err(Failure::rejected(
                resp.code.unwrap_or(rltrace_core::ErrorCode::InvalidPayload),
                resp.reason.unwrap_or_default(),
            ));
        }
        self.remember_nonce(&s.key.public(), nonce)?;
        let hash = resp.tx_hash.expect("accepted submissions carry a hash");
        if self.g.no_wait {
            return Ok(Sent {
                hash,
                block_height: None,
            });
        }
        let st = self.client.wait(&hash, Duration::from_secs(self.g.timeout))?;
        match st.state {
            TxState::Committed => Ok(Sent {
                hash,
                block_height: st.block_height,
            }),
            TxState::Excluded => Err(Failure::rejected(
                st.code.unwrap_or(rltrace_core::ErrorCode::InvalidPayload),
                st.reason.unwrap_or_default(),
            )),
            _ => Err(Failure::Other(format!("transaction {hash} was lost before commit"))),
        }
    }

    fn event_record(&self, s: &Signer, ev: &EventPayload, record: &RecordArgs) -> Result<Vec<u8>, Failure> {
        if let Some(path) = &record.report {
            return std::fs::read(path).map_err(|e| Failure::Other(format!("{}: {e}", path.display())));
        }
        let v = json!({
            "schema": RECORD_SCHEMA,
            "event": ev.event_type.as_str(),
            "serial": ev.device_serial,
            "actor": s.key.public(),
            "counterparty": ev.counterparty,
            "result": ev.result.as_str(),
            "classification": (ev.classification != Classification::None).then(|| ev.classification.as_str()),
            "note": record.note,
            "created_at": unix_now(),
        });
        Ok(serde_json::to_vec_pretty(&v).expect("record serializes"))
    }

    /// Stores the record, lists it in the TOC, submits the event and, in
    /// session mode, anchors the TOC.
    fn event(&mut self, signer: &str, mut ev: EventPayload, record: &RecordArgs) -> Result<(), Failure> {
        let s = self.signer(signer)?;
        let store = open_store(&s.store)?;
        let bytes = self.event_record(&s, &ev, record)?;
        let key = format!("{}/{}", ev.device_serial, ev.event_type.as_str());
        let entry = store.put_and_list(&s.key, &key, &bytes)?;
        ev.detail_hash = entry.content_hash;
        let what = format!("{} {}", ev.event_type, ev.device_serial);
        let sent = self.send(&s, Payload::RecordEvent(ev))?;
        let anchored = match self.g.anchor {
            AnchorMode::Session => self.anchor(&s)?,
            AnchorMode::Manual => None,
        };
        if self.json() {
            let v = json!({
                "tx_hash": sent.hash,
                "block_height": sent.block_height,
                "record": entry.content_hash,
                "toc_index": entry.index,
                "anchor": anchored.as_ref().map(|(a, len)| json!({"tx_hash": a.hash, "block_height": a.block_height, "toc_length": len})),
            });
            println!("{}", serde_json::to_string_pretty(&v).expect("serializes"));
        } else {
            self.report(&sent, &what);
            println!("record {} listed at TOC index {}", entry.content_hash, entry.index);
            if let Some((a, len)) = anchored {
                self.report(&a, &format!("anchored {len} TOC entries"));
            }
        }
        Ok(())
    }

    /// Anchors everything in the signer's TOC beyond the last on-chain
    /// anchor. `None` when there is nothing new.
    fn anchor(&mut self, s: &Signer) -> Result<Option<(Sent, u64)>, Failure> {
        let id = s.key.public();
        let store = open_store(&s.store)?;
        let anchored = match self.client.stats(&id) {
            Ok(r) => r.stats.latest_anchor.map_or(0, |a| a.toc_length),
            Err(e) => return Err(e.into()),
        };
        let draft = match store.anchor_draft(&id, anchored) {
            Ok(d) => d,
            Err(OffchainError::NoProgress { .. }) => return Ok(None),
            Err(OffchainError::NotFound(_)) if !store.has_toc(&id) => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let sent = self.send(
            s,
            Payload::AnchorToc {
                toc_length: draft.toc_length,
                toc_root: draft.toc_root,
            },
        )?;
        Ok(Some((sent, draft.toc_length)))
    }

    fn genesis(&self, chain_id: u64, validators: &[String], registrars: &[String], genesis_time: u64, out: &Path) -> Result<(), Failure> {
        let resolve = |names: &[String]| -> Result<Vec<PublicKeyId>, Failure> {
            names.iter().map(|n| self.keys.resolve(n).map_err(Failure::from)).collect()
        };
        let mut g = GenesisConfig::new(chain_id, resolve(validators)?, resolve(registrars)?);
        g.genesis_time = genesis_time;
        g.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        if out.exists() {
            return Err(Failure::Usage(format!("{} already exists", out.display())));
        }
        std::fs::write(out, g.to_toml())?;
        self.print(&g, || format!("wrote {}", out.display()));
        Ok(())
    }
}

fn open_store(root: &Path) -> Result<OffchainStore, Failure> {
    OffchainStore::open(root).map_err(Failure::from)
}
