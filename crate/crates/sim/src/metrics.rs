//! Run metrics and the tamper-evident event log.

use gridkey_core::hash::{self, TAG_LOG_CHAIN};

/// Counters accumulated over a simulation run. All counters are monotone
/// within a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimMetrics {
    /// Serialized public-info size of every broadcast, in order.
    pub pubinfo_bytes: Vec<usize>,
    pub rekey_count: u64,
    /// Retained members whose stored secrets changed, one entry per re-key.
    pub meters_touched_per_rekey: Vec<u64>,
    pub auth_accepts: u64,
    pub auth_rejects: u64,
    pub envelopes_rejected: u64,
    pub replay_rejected: u64,
    pub uplinks_accepted: u64,
    pub broadcasts: u64,
    /// Long-term secrets held by collectors. Structurally zero: collectors
    /// never receive key material.
    pub collector_secrets: u64,
}

impl SimMetrics {
    pub fn to_text(&self) -> String {
        let join = |v: &[u64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let sizes = self
            .pubinfo_bytes
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "broadcasts={}\npubinfo_bytes={}\nrekey_count={}\nmeters_touched_per_rekey={}\nauth_accepts={}\nauth_rejects={}\nenvelopes_rejected={}\nreplay_rejected={}\nuplinks_accepted={}\ncollector_secrets={}\n",
            self.broadcasts,
            sizes,
            self.rekey_count,
            join(&self.meters_touched_per_rekey),
            self.auth_accepts,
            self.auth_rejects,
            self.envelopes_rejected,
            self.replay_rejected,
            self.uplinks_accepted,
            self.collector_secrets,
        )
    }

    /// Look up a single counter by its key in the text encoding.
    pub fn get(&self, key: &str) -> Option<String> {
        self.to_text().lines().find_map(|l| {
            l.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix('='))
                .map(|v| v.to_string())
        })
    }
}

/// One line per simulator event: tick, node, kind, outcome, wire bytes.
/// The log carries a running digest so after-the-fact edits are detectable.
#[derive(Debug, Clone, Default)]
pub struct EventLog {
    lines: Vec<String>,
    chain: [u8; 32],
}

impl EventLog {
    pub fn new() -> EventLog {
        EventLog {
            lines: Vec::new(),
            chain: [0u8; 32],
        }
    }

    pub fn push(&mut self, tick: u64, node: &str, kind: &str, outcome: &str, bytes: usize) {
        let line = format!("{tick}\t{node}\t{kind}\t{outcome}\t{bytes}");
        self.chain = hash::digest(&[&[TAG_LOG_CHAIN], &self.chain, line.as_bytes()]);
        self.lines.push(line);
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn to_text(&self) -> String {
        let mut out = self.lines.join("\n");
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&format!("# chain={}\n", hex::encode(self.chain)));
        out
    }

    /// Recompute the chain over a serialized log; false on any tampering
    /// with line contents, order, or the recorded digest.
    pub fn verify_text(text: &str) -> bool {
        let mut chain = [0u8; 32];
        let mut recorded = None;
        for line in text.lines() {
            if let Some(hexdigest) = line.strip_prefix("# chain=") {
                recorded = hex::decode(hexdigest).ok();
                break;
            }
            chain = hash::digest(&[&[TAG_LOG_CHAIN], &chain, line.as_bytes()]);
        }
        recorded.is_some_and(|r| r == chain)
    }
}
