#![allow(dead_code)]

use std::path::Path;
use std::time::Duration;

use rltrace_core::scenario::{Cast, Demo};
use rltrace_node::api::TxState;
use rltrace_node::client::Client;
use rltrace_node::{keyfile, NodeConfig};

/// Demo genesis and the operator as validator, on an ephemeral port.
pub fn config(dir: &Path, seal_interval_ms: u64) -> NodeConfig {
    let cast = Cast::seeded();
    let genesis = dir.join("genesis.toml");
    if !genesis.exists() {
        std::fs::write(&genesis, cast.genesis().to_toml()).unwrap();
        keyfile::save(&dir.join("operator.key"), &cast.operator).unwrap();
    }
    let mut cfg = NodeConfig::new(dir.join("data"), genesis);
    cfg.listen = "127.0.0.1:0".parse().unwrap();
    cfg.validator_key = Some(dir.join("operator.key"));
    cfg.seal_interval_ms = seal_interval_ms;
    cfg
}

/// Submits every demo transaction in block order, waiting for each block's
/// batch to commit before the next.
pub fn drive(client: &Client, demo: &Demo) {
    for block in &demo.blocks[1..] {
        let hashes: Vec<_> = block
            .transactions
            .iter()
            .map(|tx| {
                let r = client.submit(tx).unwrap();
                assert!(r.accepted, "{r:?}");
                r.tx_hash.unwrap()
            })
            .collect();
        for h in hashes {
            let st = client.wait(&h, Duration::from_secs(30)).unwrap();
            assert_eq!(st.state, TxState::Committed, "{st:?}");
        }
    }
}
