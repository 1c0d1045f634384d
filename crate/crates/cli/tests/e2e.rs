use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rltrace_core::audit::Verdict;
use rltrace_core::registry::types::EventType;
use rltrace_node::client::Client;
use rltrace_node::{start, NodeConfig, NodeHandle};

const BIN: &str = env!("CARGO_BIN_EXE_rltrace");
const NAMES: [&str; 5] = ["customer", "retailer", "manufacturer", "logistics", "refurbisher"];

struct Env {
    home: PathBuf,
    node: NodeHandle,
}

impl Env {
    fn rl(&self, args: &[&str]) -> Output {
        Command::new(BIN)
            .args(args)
            .env("RLTRACE_HOME", &self.home)
            .env("RLTRACE_NODE", self.node.url())
            .output()
            .unwrap()
    }

    /// Runs and asserts success, returning stdout.
    fn ok(&self, args: &[&str]) -> String {
        let out = self.rl(args);
        assert!(
            out.status.success(),
            "{args:?}: {}\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn code(&self, args: &[&str]) -> i32 {
        let out = self.rl(args);
        eprintln!("{args:?} -> {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr).trim());
        out.status.code().unwrap()
    }

    fn client(&self) -> Client {
        Client::new(self.node.url())
    }

    fn store(&self, name: &str) -> PathBuf {
        self.home.join("stores").join(name)
    }
}

fn keygen(home: &Path, name: &str) {
    let out = Command::new(BIN).args(["keygen", name]).env("RLTRACE_HOME", home).output().unwrap();
    assert!(out.status.success());
}

/// Keys, genesis and a running node with every stakeholder store attached.
fn setup(dir: &Path) -> Env {
    let home = dir.join("home");
    for n in ["operator", "buyer"].iter().chain(NAMES.iter()) {
        keygen(&home, n);
    }
    let genesis = dir.join("genesis.toml");
    let out = Command::new(BIN)
        .args(["genesis", "--chain-id", "4", "--validator", "operator", "--registrar", "operator", "--out"])
        .arg(&genesis)
        .env("RLTRACE_HOME", &home)
        .output()
        .unwrap();
    assert!(out.status.success());
    let mut cfg = NodeConfig::new(dir.join("node"), &genesis);
    cfg.listen = "127.0.0.1:0".parse().unwrap();
    cfg.seal_interval_ms = 20;
    cfg.validator_key = Some(home.join("keys/operator.key"));
    cfg.record_stores = NAMES.iter().map(|n| home.join("stores").join(n)).collect();
    Env { node: start(cfg).unwrap(), home }
}

fn onboard(env: &Env) {
    for (name, role) in NAMES.iter().zip(["CUSTOMER", "RETAILER", "MANUFACTURER", "THIRD_PARTY_LOGISTICS", "REFURBISHER"]) {
        env.ok(&["register-stakeholder", "--as", "operator", "--id", name, "--role", role, "--name", name]);
    }
}

/// Registration through the functional test, leaving the device with
/// the refurbisher.
fn to_refurbisher(env: &Env, serial: &str, wipe: bool) {
    env.ok(&["register-device", "--as", "manufacturer", "--serial", serial, "--model", "M1"]);
    env.ok(&["record-event", "--as", "retailer", "--type", "COLLECTION", "--serial", serial, "--counterparty", "customer"]);
    env.ok(&["transfer", "--as", "retailer", "--serial", serial, "--to", "logistics"]);
    env.ok(&["transfer", "--as", "logistics", "--serial", serial, "--to", "refurbisher"]);
    env.ok(&["record-event", "--as", "refurbisher", "--type", "INSPECTION", "--serial", serial]);
    env.ok(&["record-event", "--as", "refurbisher", "--type", "PHYSICAL_CONDITION_ANALYSIS", "--serial", serial]);
    if wipe {
        env.ok(&["record-event", "--as", "refurbisher", "--type", "DATA_WIPE", "--serial", serial]);
    }
    env.ok(&["record-event", "--as", "refurbisher", "--type", "FUNCTIONAL_TEST", "--result", "PASS", "--serial", serial]);
}

#[test]
fn full_pipeline_round_trips_and_audits_clean() {
    let dir = tempfile::tempdir().unwrap();
    let env = setup(dir.path());
    let client = env.client();
    onboard(&env);
    let retailer = env.ok(&["keys", "--output", "json"]);
    let keys: serde_json::Value = serde_json::from_str(&retailer).unwrap();
    assert_eq!(keys.as_array().unwrap().len(), 7);

    to_refurbisher(&env, "SN-1", true);
    env.ok(&["classify", "--as", "refurbisher", "--serial", "SN-1", "--class", "REFURBISHED"]);
    env.ok(&["transfer", "--as", "refurbisher", "--serial", "SN-1", "--to", "retailer"]);
    let report = dir.path().join("sale.txt");
    std::fs::write(&report, "invoice 2291, grade B").unwrap();
    env.ok(&["sell", "--as", "retailer", "--serial", "SN-1", "--buyer", "buyer", "--report", report.to_str().unwrap()]);

    let hist = client.history("SN-1").unwrap();
    let seqs: Vec<u64> = hist.events.iter().map(|e| e.seq).collect();
    assert_eq!(seqs, (0..10).collect::<Vec<_>>());
    let sale = hist.events.last().unwrap();
    assert_eq!(sale.event_type, EventType::Sale);
    assert_eq!(client.record(&sale.detail_hash).unwrap(), b"invoice 2291, grade B");

    let trace = env.ok(&["trace", "SN-1"]);
    assert!(trace.contains("SALE") && trace.contains("FINALIZED"));
    let json: serde_json::Value = serde_json::from_str(&env.ok(&["--output", "json", "trace", "SN-1"])).unwrap();
    assert_eq!(json["events"].as_array().unwrap().len(), 10);

    assert!(env.ok(&["audit", "SN-1"]).contains("verdict COMPLIANT"));
    assert_eq!(env.code(&["audit", "--all"]), 0);
    assert_eq!(env.code(&["verify"]), 0);
    let stats: serde_json::Value = serde_json::from_str(&env.ok(&["stats", "refurbisher", "--output", "json"])).unwrap();
    assert_eq!(stats["stats"]["latest_anchor"]["toc_length"], 6);
}

#[test]
fn rejections_exit_with_their_codes() {
    let dir = tempfile::tempdir().unwrap();
    let env = setup(dir.path());
    onboard(&env);
    to_refurbisher(&env, "SN-2", false);

    // SALE straight after processing steps, with no wipe or classification.
    let sale = ["sell", "--as", "refurbisher", "--serial", "SN-2", "--buyer", "buyer"];
    assert_eq!(env.code(&sale), 13);
    let early = ["record-event", "--as", "refurbisher", "--type", "SALE", "--serial", "SN-2", "--counterparty", "buyer"];
    assert_eq!(env.code(&early), 13);
    // Only the custodian may act.
    assert_eq!(env.code(&["record-event", "--as", "retailer", "--type", "REPAIR", "--serial", "SN-2"]), 10);
    let by_customer = ["register-device", "--as", "customer", "--serial", "X", "--model", "M", "--manufacturer", "manufacturer"];
    assert_eq!(env.code(&by_customer), 10);
    assert_eq!(env.code(&["register-device", "--as", "retailer", "--serial", "X", "--model", "M"]), 17);
    assert_eq!(env.code(&["register-device", "--as", "manufacturer", "--serial", "SN-2", "--model", "M"]), 11);
    assert_eq!(env.code(&["trace", "NOPE"]), 14);
    assert_eq!(env.code(&["trace", "--as"]), 2);
    assert_eq!(env.code(&["record-event", "--as", "nobody", "--type", "REPAIR", "--serial", "SN-2"]), 2);
    assert_eq!(env.code(&["anchor-toc", "--as", "refurbisher"]), 0);

    // The wipe is missing, so release is impossible and the audit still
    // passes: nothing on the chain is out of order.
    assert_eq!(env.client().compliance("SN-2").unwrap().report.verdict, Verdict::Compliant);

    let out = Command::new(BIN)
        .args(["status"])
        .env("RLTRACE_NODE", "http://127.0.0.1:1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn audit_exit_status_follows_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let env = setup(dir.path());
    onboard(&env);
    to_refurbisher(&env, "SN-3", true);
    assert_eq!(env.code(&["audit", "SN-3"]), 0);

    let wipe = env
        .client()
        .history("SN-3")
        .unwrap()
        .events
        .into_iter()
        .find(|e| e.event_type == EventType::DataWipe)
        .unwrap();
    let store = rltrace_core::offchain::OffchainStore::open(&env.store("refurbisher")).unwrap();
    let path = store.cas().path_for(&wipe.detail_hash);
    let original = std::fs::read(&path).unwrap();

    std::fs::write(&path, b"nothing was wiped").unwrap();
    assert_eq!(env.code(&["audit", "SN-3"]), 4);
    assert_eq!(env.code(&["audit", "--all"]), 4);

    std::fs::remove_file(&path).unwrap();
    assert_eq!(env.code(&["audit", "SN-3"]), 5);

    std::fs::write(&path, original).unwrap();
    assert_eq!(env.code(&["audit", "SN-3"]), 0);
}

#[test]
fn no_wait_returns_before_commit() {
    let dir = tempfile::tempdir().unwrap();
    let env = setup(dir.path());
    let out = env.ok(&[
        "--no-wait",
        "--output",
        "json",
        "register-stakeholder",
        "--as",
        "operator",
        "--id",
        "customer",
        "--role",
        "CUSTOMER",
        "--name",
        "c",
    ]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let hash = rltrace_core::Hash256::from_hex(v["tx_hash"].as_str().unwrap()).unwrap();
    let st = env.client().wait(&hash, std::time::Duration::from_secs(10)).unwrap();
    assert_eq!(st.state, rltrace_node::api::TxState::Committed);
    // A second back-to-back submission picks the next nonce.
    env.ok(&["--no-wait", "register-stakeholder", "--as", "operator", "--id", "retailer", "--role", "RETAILER", "--name", "r"]);
    env.ok(&["register-stakeholder", "--as", "operator", "--id", "logistics", "--role", "THIRD_PARTY_LOGISTICS", "--name", "l"]);
}

#[test]
fn checked_in_demo_script_is_compliant() {
    let dir = tempfile::tempdir().unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let script = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scripts/demo.sh");
    let out = Command::new("bash")
        .arg(script)
        .env("RLTRACE", BIN)
        .env("WORKDIR", dir.path())
        .env("PORT", port.to_string())
        .env_remove("RLTRACE_HOME")
        .env_remove("RLTRACE_NODE")
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}\n{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout.contains("verdict COMPLIANT"));
    assert!(stdout.contains("system COMPLIANT"));
}
