mod commands;
mod exit;
mod keystore;
mod render;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rltrace_core::registry::types::{Classification, EventType, Role, TestResult};

#[derive(Parser, Debug)]
#[command(name = "rltrace", version, about = "Reverse-logistics traceability client")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Node API base URL.
    #[arg(long, global = true, env = "RLTRACE_NODE", default_value = "http://127.0.0.1:7700")]
    pub node: String,
    /// Working directory for keys, record stores and nonce state.
    #[arg(long, global = true, env = "RLTRACE_HOME", default_value = ".rltrace")]
    pub home: PathBuf,
    /// Key directory [default: <home>/keys].
    #[arg(long, global = true, env = "RLTRACE_KEYSTORE")]
    pub keystore: Option<PathBuf>,
    /// Off-chain record store of the signing identity [default: <home>/stores/<name>].
    #[arg(long, global = true)]
    pub store: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Output::Text)]
    pub output: Output,
    /// Return after submission instead of waiting for the commit.
    #[arg(long, global = true)]
    pub no_wait: bool,
    /// When to anchor the TOC after adding records.
    #[arg(long, global = true, value_enum, default_value_t = AnchorMode::Session)]
    pub anchor: AnchorMode,
    /// Seconds to wait for a commit.
    #[arg(long, global = true, default_value_t = 60)]
    pub timeout: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Output {
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AnchorMode {
    /// Anchor at the end of every command that added records.
    Session,
    /// Only `anchor-toc` anchors.
    Manual,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a node in the foreground.
    Node(NodeArgs),
    /// Write a genesis file.
    Genesis {
        #[arg(long)]
        chain_id: u64,
        /// Validator key name or hex id (repeatable).
        #[arg(long = "validator", required = true)]
        validators: Vec<String>,
        /// Registrar key name or hex id (repeatable).
        #[arg(long = "registrar")]
        registrars: Vec<String>,
        /// Unix seconds for block 0.
        #[arg(long, default_value_t = 0)]
        genesis_time: u64,
        #[arg(long, default_value = "genesis.toml")]
        out: PathBuf,
    },
    /// Create a new named key.
    Keygen { name: String },
    /// List keystore entries.
    Keys,
    /// Register a stakeholder (registrars only).
    RegisterStakeholder {
        #[arg(long = "as")]
        signer: String,
        /// Key name or hex id of the new stakeholder.
        #[arg(long)]
        id: String,
        #[arg(long)]
        role: Role,
        #[arg(long)]
        name: String,
    },
    /// Activate or deactivate a stakeholder (registrars only).
    SetActive {
        #[arg(long = "as")]
        signer: String,
        #[arg(long)]
        id: String,
        #[arg(long, action = clap::ArgAction::Set)]
        active: bool,
    },
    /// Register a device and its bill of materials.
    RegisterDevice {
        #[arg(long = "as")]
        signer: String,
        #[arg(long)]
        serial: String,
        #[arg(long)]
        model: String,
        /// Original manufacturer [default: the signer].
        #[arg(long)]
        manufacturer: Option<String>,
        /// TYPE:SERIAL[:FEATURE_HASH_HEX], repeatable. Without any, one
        /// part per component type is derived from the device serial.
        #[arg(long = "component")]
        components: Vec<String>,
    },
    /// Record a process event, storing its report off-chain.
    RecordEvent {
        #[arg(long = "as")]
        signer: String,
        #[arg(long = "type")]
        event_type: EventType,
        #[arg(long)]
        serial: String,
        #[arg(long)]
        counterparty: Option<String>,
        #[arg(long, default_value = "NA")]
        result: TestResult,
        #[arg(long)]
        classification: Option<Classification>,
        /// COMPONENT_REPLACEMENT: serial of the part taken out.
        #[arg(long)]
        remove: Option<String>,
        /// COMPONENT_REPLACEMENT: TYPE:SERIAL[:FEATURE_HASH_HEX] of the new part.
        #[arg(long)]
        install: Option<String>,
        #[command(flatten)]
        record: RecordArgs,
    },
    /// Record a CLASSIFICATION event.
    Classify {
        #[arg(long = "as")]
        signer: String,
        #[arg(long)]
        serial: String,
        #[arg(long = "class")]
        classification: Classification,
        #[command(flatten)]
        record: RecordArgs,
    },
    /// Hand a device to another stakeholder.
    Transfer {
        #[arg(long = "as")]
        signer: String,
        #[arg(long)]
        serial: String,
        #[arg(long)]
        to: String,
        #[command(flatten)]
        record: RecordArgs,
    },
    /// Sell a processed device on the secondary market.
    Sell {
        #[arg(long = "as")]
        signer: String,
        #[arg(long)]
        serial: String,
        #[arg(long)]
        buyer: String,
        #[command(flatten)]
        record: RecordArgs,
    },
    /// Donate a processed device.
    Donate {
        #[arg(long = "as")]
        signer: String,
        #[arg(long)]
        serial: String,
        #[arg(long)]
        to: String,
        #[command(flatten)]
        record: RecordArgs,
    },
    /// Anchor the signer's TOC on-chain.
    AnchorToc {
        #[arg(long = "as")]
        signer: String,
    },
    /// Show a device's history in event order.
    Trace { serial: String },
    /// Audit one device, or the whole chain with --all.
    Audit {
        #[arg(required_unless_present = "all", conflicts_with = "all")]
        serial: Option<String>,
        #[arg(long)]
        all: bool,
    },
    /// Re-verify the node's stored chain.
    Verify,
    /// Per-stakeholder statistics.
    Stats { stakeholder: String },
    /// Node height, tip and state digest.
    Status,
}

#[derive(Args, Debug, Clone, Default)]
pub struct RecordArgs {
    /// Report file stored verbatim as the event record.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Free-text note for the generated record when no report is given.
    #[arg(long)]
    pub note: Option<String>,
}

#[derive(Args, Debug)]
pub struct NodeArgs {
    /// TOML config; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub listen: Option<std::net::SocketAddr>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub genesis: Option<PathBuf>,
    #[arg(long)]
    pub validator_key: Option<PathBuf>,
    #[arg(long)]
    pub seal_interval_ms: Option<u64>,
    #[arg(long)]
    pub allow_empty: bool,
    /// Extra off-chain store roots searched by audits (repeatable).
    #[arg(long = "record-store")]
    pub record_stores: Vec<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let code = match commands::run(cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
