//! Plain-text tables for query commands.

use std::fmt::Write;

use rltrace_core::registry::types::{Classification, TestResult};
use rltrace_node::api::{HistoryResponse, StatsResponse, StatusResponse};

pub fn history(h: &HistoryResponse) -> String {
    let d = &h.device;
    let mut s = String::new();
    let _ = writeln!(s, "device {} ({}) at height {}", d.serial, d.model, h.height);
    let _ = writeln!(
        s,
        "state {}  custodian {}  classification {}  disposition {}",
        d.state,
        d.custodian.short(),
        d.classification,
        d.disposition
    );
    let _ = writeln!(s, "{:>4}  {:>6}  {:<28} {:<10} {:<10} {:<14} record", "seq", "height", "event", "actor", "to", "outcome");
    for e in &h.events {
        let to = e.counterparty.map_or("-".to_string(), |c| c.short());
        let outcome = if e.classification != Classification::None {
            e.classification.as_str()
        } else if e.result != TestResult::Na {
            e.result.as_str()
        } else {
            "-"
        };
        let _ = writeln!(
            s,
            "{:>4}  {:>6}  {:<28} {:<10} {:<10} {:<14} {}",
            e.seq,
            e.block_height,
            e.event_type.as_str(),
            e.actor.short(),
            to,
            outcome,
            e.detail_hash
        );
    }
    s
}

pub fn stats(r: &StatsResponse) -> String {
    let st = &r.stats;
    let mut s = String::new();
    let _ = writeln!(s, "{} [{}] {}{}", st.display_name, st.role, st.id, if st.active { "" } else { " (inactive)" });
    let _ = writeln!(s, "devices registered {}  handled {}", st.devices_registered, st.devices_handled);
    for (event, n) in &st.event_counts {
        let _ = writeln!(s, "  {:<28} {n}", event.as_str());
    }
    match &st.latest_anchor {
        Some(a) => {
            let _ = writeln!(s, "latest anchor: {} entries, root {} at height {}", a.toc_length, a.toc_root, a.anchored_at);
        }
        None => s.push_str("no anchors\n"),
    }
    s
}

pub fn status(r: &StatusResponse) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "chain {} height {}", r.chain_id, r.height);
    let _ = writeln!(s, "tip {}", r.tip);
    let _ = writeln!(s, "state digest {}", r.state_digest);
    let _ = writeln!(s, "validator {}", r.validator.map_or("none (query-only)".to_string(), |v| v.to_string()));
    let _ = writeln!(s, "pending {}", r.pending);
    if let Some(h) = &r.halted {
        let _ = writeln!(s, "HALTED: {h}");
    }
    s
}
