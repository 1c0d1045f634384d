//! Validator and query node: holds the committed ledger, seals pending
//! transactions on a fixed interval and serves the HTTP/JSON API.

pub mod api;
pub mod client;
pub mod config;
pub mod keyfile;
pub mod server;
pub mod service;

use std::net::{SocketAddr, TcpListener};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use rltrace_core::genesis::GenesisError;
use rltrace_core::offchain::OffchainError;
use rltrace_core::store::StoreError;
use rltrace_core::verify::ChainReport;
use rltrace_core::{LedgerError, PublicKeyId};
use tokio::sync::oneshot;

pub use config::NodeConfig;
pub use service::Node;

#[derive(Debug, thiserror::Error)]
pub enum NodeError {
    #[error("config: {0}")]
    Config(String),
    #[error("data directory: {0}")]
    Format(String),
    #[error(transparent)]
    Genesis(#[from] GenesisError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("stored chain fails verification:\n{0}")]
    Corrupt(Box<ChainReport>),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Key(#[from] keyfile::KeyFileError),
    #[error("{0} is not a validator in genesis")]
    NotValidator(PublicKeyId),
    #[error(transparent)]
    Offchain(#[from] OffchainError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// A node running on its own thread. Dropping it shuts the node down.
pub struct NodeHandle {
    addr: SocketAddr,
    node: Arc<Node>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl NodeHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn node(&self) -> &Arc<Node> {
        &self.node
    }

    /// Stops accepting requests and sealing, then waits for the thread.
    /// Transactions still pending are dropped.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for NodeHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Opens the data directory, binds the listener and starts serving on a
/// background thread. Binding port 0 picks a free port; see
/// [`NodeHandle::addr`].
pub fn start(config: NodeConfig) -> Result<NodeHandle, NodeError> {
    let listener = TcpListener::bind(config.listen)?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let node = Arc::new(Node::open(config)?);
    let (tx, rx) = oneshot::channel();
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()?;
    let n = node.clone();
    let thread = std::thread::Builder::new()
        .name("rltrace-node".into())
        .spawn(move || {
            runtime.block_on(async move {
                let _ = run(n, listener, async {
                    let _ = rx.await;
                })
                .await;
            })
        })?;
    tracing::info!(%addr, "listening");
    Ok(NodeHandle {
        addr,
        node,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}

/// Runs a node in the foreground until SIGINT or SIGTERM.
pub fn serve(config: NodeConfig) -> Result<(), NodeError> {
    let handle = start(config)?;
    let runtime = tokio::runtime::Builder::new_current_thread().enable_all().build()?;
    runtime.block_on(async {
        #[cfg(unix)]
        {
            use tokio::signal::unix::{signal, SignalKind};
            let mut term = signal(SignalKind::terminate())?;
            tokio::select! {
                _ = tokio::signal::ctrl_c() => {}
                _ = term.recv() => {}
            }
        }
        #[cfg(not(unix))]
        let _ = tokio::signal::ctrl_c().await;
        Ok::<(), std::io::Error>(())
    })?;
    tracing::info!("shutting down");
    handle.shutdown();
    Ok(())
}

async fn run(node: Arc<Node>, listener: TcpListener, shutdown: impl std::future::Future<Output = ()> + Send + 'static) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::from_std(listener)?;
    let (stop_tx, stop_rx) = tokio::sync::watch::channel(false);

    let sealer = {
        let node = node.clone();
        let mut stop = stop_rx.clone();
        let period = Duration::from_millis(node.config().seal_interval_ms.max(1));
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(period);
            tick.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
            loop {
                tokio::select! {
                    _ = tick.tick() => {}
                    _ = stop.changed() => break,
                }
                let n = node.clone();
                match tokio::task::spawn_blocking(move || n.seal_once()).await {
                    Ok(Ok(_)) => {}
                    Ok(Err(e)) => tracing::error!(error = %e, "sealing round failed"),
                    Err(e) => tracing::error!(error = %e, "sealing task panicked"),
                }
            }
        })
    };

    let app = server::router(node);
    let served = axum::serve(listener, app).with_graceful_shutdown(async move {
        shutdown.await;
        let _ = stop_tx.send(true);
    });
    let result = served.await;
    let _ = sealer.await;
    result
}
