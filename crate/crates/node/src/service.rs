//! Node state: committed ledger, on-disk block log, pending pool and the
//! sealing round. HTTP lives in [`crate::server`].

use std::collections::{HashMap, VecDeque};
use std::fs;
use std::path::Path;
use std::sync::{Mutex, RwLock};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rltrace_core::block::Block;
use rltrace_core::offchain::OffchainStore;
use rltrace_core::store::BlockStore;
use rltrace_core::verify::{self, ChainReport};
use rltrace_core::{ErrorCode, GenesisConfig, Hash256, Keypair, Ledger, PublicKeyId, Transaction};

use crate::api::{MetricsResponse, SubmitResponse, TxState, TxStatusResponse};
use crate::config::NodeConfig;
use crate::{keyfile, NodeError};

pub const FORMAT_FILE: &str = "FORMAT";
pub const FORMAT_VERSION: &str = "rltrace-node/1";

/// Pending transactions above this count are refused.
pub const MAX_PENDING: usize = 100_000;

const LATENCY_WINDOW: usize = 100_000;

pub(crate) struct Chain {
    pub ledger: Ledger,
    pub store: BlockStore,
    /// Committed transaction hash to block height.
    pub tx_index: HashMap<Hash256, u64>,
}

#[derive(Clone, Debug)]
enum Entry {
    Pending { admitted: Instant },
    Committed { latency: Duration },
    Excluded { code: ErrorCode, reason: String },
}

#[derive(Default)]
struct Pool {
    queue: Vec<(Hash256, Transaction)>,
    status: HashMap<Hash256, Entry>,
}

#[derive(Default)]
struct Metrics {
    blocks_sealed: u64,
    txs_committed: u64,
    txs_excluded: u64,
    apply_total: Duration,
    apply_count: u64,
    latencies_us: VecDeque<u64>,
}

pub struct Node {
    config: NodeConfig,
    genesis: GenesisConfig,
    validator: Option<Keypair>,
    pub(crate) chain: RwLock<Chain>,
    pool: Mutex<Pool>,
    metrics: Mutex<Metrics>,
    halted: Mutex<Option<String>>,
    stores: Vec<OffchainStore>,
}

fn check_format(dir: &Path) -> Result<(), NodeError> {
    let path = dir.join(FORMAT_FILE);
    match fs::read_to_string(&path) {
        Ok(text) if text.trim() == FORMAT_VERSION => Ok(()),
        Ok(text) => Err(NodeError::Format(format!(
            "{} holds {:?}, expected {FORMAT_VERSION}",
            path.display(),
            text.trim()
        ))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            if dir.join(rltrace_core::store::LOG_FILE).exists() {
                return Err(NodeError::Format(format!("{} has a block log but no {FORMAT_FILE}", dir.display())));
            }
            fs::write(&path, format!("{FORMAT_VERSION}\n"))?;
            Ok(())
        }
        Err(e) => Err(e.into()),
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl Node {
    /// Opens or initialises the data directory.
    ///
    /// A torn tail record is truncated; any other damage to the block log
    /// makes this fail with the verification report.
    pub fn open(config: NodeConfig) -> Result<Node, NodeError> {
        let genesis = GenesisConfig::load(&config.genesis)?;
        genesis.validate()?;
        fs::create_dir_all(&config.data_dir)?;
        check_format(&config.data_dir)?;

        let (mut store, recovery) = BlockStore::open(&config.data_dir)?;
        if recovery.truncated_bytes > 0 {
            tracing::warn!(bytes = recovery.truncated_bytes, "truncated torn tail of block log");
        }
        let raws = store.read_all_raw()?;
        let blocks = if raws.is_empty() {
            let block = Block::genesis(&genesis);
            store.append(&block)?;
            vec![block]
        } else {
            let report = verify::verify_encoded(&raws, &genesis);
            if !report.valid {
                return Err(NodeError::Corrupt(Box::new(report)));
            }
            raws.iter()
                .map(|r| Block::decode(r))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| NodeError::Config(format!("decoding verified block: {e}")))?
        };
        let ledger = Ledger::from_blocks(genesis.clone(), blocks)?;
        let mut tx_index = HashMap::new();
        for block in ledger.blocks() {
            for tx in &block.transactions {
                tx_index.insert(tx.hash().expect("verified block"), block.height());
            }
        }

        let validator = match &config.validator_key {
            None => None,
            Some(path) => {
                let key = keyfile::load(path)?;
                if !genesis.is_validator(&key.public()) {
                    return Err(NodeError::NotValidator(key.public()));
                }
                Some(key)
            }
        };

        let mut stores = vec![OffchainStore::open(&config.data_dir)?];
        for root in &config.record_stores {
            stores.push(OffchainStore::open(root)?);
        }

        tracing::info!(
            height = ledger.height(),
            chain_id = genesis.chain_id,
            validator = validator.as_ref().map(|k| k.public().short()),
            "node opened"
        );
        Ok(Node {
            config,
            genesis,
            validator,
            chain: RwLock::new(Chain {
                ledger,
                store,
                tx_index,
            }),
            pool: Mutex::new(Pool::default()),
            metrics: Mutex::new(Metrics::default()),
            halted: Mutex::new(None),
            stores,
        })
    }

    pub fn config(&self) -> &NodeConfig {
        &self.config
    }

    pub fn genesis(&self) -> &GenesisConfig {
        &self.genesis
    }

    pub fn validator(&self) -> Option<PublicKeyId> {
        self.validator.as_ref().map(Keypair::public)
    }

    pub fn stores(&self) -> &[OffchainStore] {
        &self.stores
    }

    pub fn height(&self) -> u64 {
        self.chain.read().unwrap().ledger.height()
    }

    pub fn halted(&self) -> Option<String> {
        self.halted.lock().unwrap().clone()
    }

    pub fn pending(&self) -> usize {
        self.pool.lock().unwrap().queue.len()
    }

    /// Admission: decoding, duplicate, signature and nonce checks against
    /// committed state. Contract rules run when the block is sealed.
    pub fn submit(&self, tx_hex: &str) -> SubmitResponse {
        let chain = self.chain.read().unwrap();
        let height = chain.ledger.height();
        let reject = |hash, code: ErrorCode, reason: String| SubmitResponse {
            height,
            accepted: false,
            tx_hash: hash,
            code: Some(code),
            reason: Some(reason),
        };
        let tx = match Transaction::from_hex(tx_hex) {
            Ok(tx) => tx,
            Err(e) => return reject(None, ErrorCode::Serialization, e.to_string()),
        };
        let hash = match tx.hash() {
            Ok(h) => h,
            Err(e) => return reject(None, ErrorCode::Serialization, e.to_string()),
        };
        if self.validator.is_none() {
            return reject(Some(hash), ErrorCode::PermissionDenied, "query-only node does not accept transactions".into());
        }
        if let Some(reason) = self.halted() {
            return reject(Some(hash), ErrorCode::Scheduling, format!("sealing halted: {reason}"));
        }
        if chain.tx_index.contains_key(&hash) {
            return reject(Some(hash), ErrorCode::AlreadyExists, "transaction already committed".into());
        }
        if let Err(e) = chain.ledger.admit(&tx) {
            return reject(Some(hash), e.code(), e.to_string());
        }
        drop(chain);
        let mut pool = self.pool.lock().unwrap();
        if matches!(pool.status.get(&hash), Some(Entry::Pending { .. })) {
            return reject(Some(hash), ErrorCode::AlreadyExists, "transaction already pending".into());
        }
        if pool.queue.len() >= MAX_PENDING {
            return reject(Some(hash), ErrorCode::Scheduling, "pending pool is full".into());
        }
        pool.queue.push((hash, tx));
        pool.status.insert(
            hash,
            Entry::Pending {
                admitted: Instant::now(),
            },
        );
        SubmitResponse {
            height,
            accepted: true,
            tx_hash: Some(hash),
            code: None,
            reason: None,
        }
    }

    pub fn tx_status(&self, hash: &Hash256) -> TxStatusResponse {
        let chain = self.chain.read().unwrap();
        let height = chain.ledger.height();
        let mut out = TxStatusResponse {
            height,
            tx_hash: *hash,
            state: TxState::Unknown,
            block_height: None,
            code: None,
            reason: None,
            commit_latency_us: None,
        };
        if let Some(&h) = chain.tx_index.get(hash) {
            out.state = TxState::Committed;
            out.block_height = Some(h);
        }
        drop(chain);
        match self.pool.lock().unwrap().status.get(hash) {
            Some(Entry::Pending { .. }) if out.state == TxState::Unknown => out.state = TxState::Pending,
            Some(Entry::Committed { latency, .. }) => out.commit_latency_us = Some(latency.as_micros() as u64),
            Some(Entry::Excluded { code, reason }) if out.state == TxState::Unknown => {
                out.state = TxState::Excluded;
                out.code = Some(*code);
                out.reason = Some(reason.clone());
            }
            _ => {}
        }
        out
    }

    /// One sealing round. Returns the new height if a block was sealed.
    pub fn seal_once(&self) -> Result<Option<u64>, NodeError> {
        let Some(key) = &self.validator else {
            return Ok(None);
        };
        if self.halted().is_some() {
            return Ok(None);
        }
        let batch = std::mem::take(&mut self.pool.lock().unwrap().queue);
        if batch.is_empty() && !self.config.allow_empty {
            return Ok(None);
        }
        let txs: Vec<Transaction> = batch.iter().map(|(_, tx)| tx.clone()).collect();

        let mut chain = self.chain.write().unwrap();
        if let Err(e) = chain.ledger.check_turn(&key.public()) {
            // Another validator owns this height; without peers nothing
            // will seal it, so keep the batch for later.
            drop(chain);
            self.requeue(batch);
            tracing::debug!(error = %e, "not our turn");
            return Ok(None);
        }
        let started = Instant::now();
        let outcome = chain.ledger.seal_block(&txs, key, unix_now(), self.config.allow_empty)?;
        let apply = started.elapsed();

        let sealed = match &outcome.block {
            None => None,
            Some(block) => {
                if let Err(e) = chain.store.append(block) {
                    let msg = format!("appending block {}: {e}", block.height());
                    tracing::error!("{msg}; sealing halted");
                    *self.halted.lock().unwrap() = Some(msg);
                    return Err(e.into());
                }
                let h = block.height();
                for &i in &outcome.included {
                    chain.tx_index.insert(batch[i].0, h);
                }
                Some(h)
            }
        };
        drop(chain);
        let committed_at = Instant::now();

        let mut pool = self.pool.lock().unwrap();
        let mut metrics = self.metrics.lock().unwrap();
        if let Some(h) = sealed {
            metrics.blocks_sealed += 1;
            if !txs.is_empty() {
                metrics.apply_total += apply;
                metrics.apply_count += txs.len() as u64;
            }
            for &i in &outcome.included {
                let hash = batch[i].0;
                let admitted = match pool.status.get(&hash) {
                    Some(Entry::Pending { admitted }) => *admitted,
                    _ => committed_at,
                };
                let latency = committed_at.duration_since(admitted);
                if metrics.latencies_us.len() == LATENCY_WINDOW {
                    metrics.latencies_us.pop_front();
                }
                metrics.latencies_us.push_back(latency.as_micros() as u64);
                metrics.txs_committed += 1;
                pool.status.insert(hash, Entry::Committed { latency });
            }
            tracing::debug!(height = h, txs = outcome.included.len(), "sealed block");
        }
        for (i, err) in &outcome.excluded {
            metrics.txs_excluded += 1;
            pool.status.insert(
                batch[*i].0,
                Entry::Excluded {
                    code: err.code(),
                    reason: err.to_string(),
                },
            );
        }
        Ok(sealed)
    }

    fn requeue(&self, mut batch: Vec<(Hash256, Transaction)>) {
        let mut pool = self.pool.lock().unwrap();
        batch.append(&mut pool.queue);
        pool.queue = batch;
    }

    pub fn metrics(&self) -> MetricsResponse {
        let height = self.height();
        let m = self.metrics.lock().unwrap();
        let mut lat: Vec<u64> = m.latencies_us.iter().copied().collect();
        lat.sort_unstable();
        MetricsResponse {
            height,
            blocks_sealed: m.blocks_sealed,
            txs_committed: m.txs_committed,
            txs_excluded: m.txs_excluded,
            mean_apply_us: (m.apply_count > 0).then(|| m.apply_total.as_secs_f64() * 1e6 / m.apply_count as f64),
            median_commit_latency_us: (!lat.is_empty()).then(|| lat[lat.len() / 2]),
        }
    }

    /// Committed blocks plus the height they end at.
    pub fn blocks(&self) -> (u64, Vec<Block>) {
        let chain = self.chain.read().unwrap();
        (chain.ledger.height(), chain.ledger.blocks().to_vec())
    }

    /// Re-reads the block log from disk and verifies it from scratch.
    pub fn verify_stored(&self) -> Result<(u64, ChainReport), NodeError> {
        let (height, raws) = {
            let chain = self.chain.read().unwrap();
            (chain.ledger.height(), chain.store.read_all_raw()?)
        };
        Ok((height, verify::verify_encoded(&raws, &self.genesis)))
    }
}
