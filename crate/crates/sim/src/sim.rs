//! Deterministic discrete-event simulation of the metering network: one
//! utility head end (group controller, enrollment store, authentication
//! center), store-and-forward collectors with link-layer sessions, and
//! meters that may also relay.
//!
//! Everything observable — event log, metrics, wire bytes — is a pure
//! function of the scenario and the seed. Scripted events are processed in
//! (tick, insertion-order) order; message propagation inside an operation
//! is walked eagerly along the static routes with per-link delays, so
//! per-hop outcomes still land on the correct tick.
//!
//! Confidentiality model: broadcast payloads are sealed under the group
//! key that members derive from the broadcast public information, and
//! uplink readings are sealed under a per-meter key derived from the same
//! long-term secret. Collectors and relays only ever see ciphertext; the
//! collector-to-utility leg is additionally ciphered by the link session
//! once its handshake has completed.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use gridkey_core::aead::{self, Envelope};
use gridkey_core::bgkm::{
    self, BgkmError, GroupKey, GroupState, MeterId, MeterSecret, PublicInfo,
};
use gridkey_core::drbg::Drbg;
use num_bigint::BigUint;
use gridkey_core::hash::{self, TAG_UPLINK_KEY};
use gridkey_core::linkauth::{
    decipher_frame, run_handshake, AuthCenter, AuthOutcome as LinkOutcome, Direction, LinkError,
    LinkSession, SimCard, Transcript,
};
use gridkey_core::meterstate::MeterBoard;
use gridkey_core::puf::{AuthOutcome, ChallengeResponder, CrpStore, PufError, SimPuf};
use thiserror::Error;

use crate::metrics::{EventLog, SimMetrics};
use crate::scenario::{
    AssertCheck, BroadcastRef, EventOp, Scenario, ScenarioEvent, Secrecy, SimParams,
};
use crate::threats::{self, Verdict};
use crate::topology::{Topology, TopologyError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("{0} is not a meter")]
    NotAMeter(String),
    #[error("meter {0} is not provisioned")]
    NotProvisioned(String),
    #[error(transparent)]
    Bgkm(#[from] BgkmError),
    #[error(transparent)]
    Puf(#[from] PufError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error("unknown attack scenario {0}")]
    UnknownScenario(String),
    #[error("attack precondition failed: {0}")]
    AttackPrecondition(String),
}

/// Utility-side verdict on one received uplink envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UplinkOutcome {
    Accepted,
    ReplayRejected,
    AuthFailure,
    UnknownSender,
    Malformed,
    DroppedBusy,
}

impl UplinkOutcome {
    pub fn label(self) -> &'static str {
        match self {
            UplinkOutcome::Accepted => "ACCEPTED",
            UplinkOutcome::ReplayRejected => "REPLAY_REJECTED",
            UplinkOutcome::AuthFailure => "AUTH_FAILURE",
            UplinkOutcome::UnknownSender => "UNKNOWN_SENDER",
            UplinkOutcome::Malformed => "MALFORMED",
            UplinkOutcome::DroppedBusy => "DROPPED_BUSY",
        }
    }
}

/// Archived broadcast: everything needed to re-attempt decryption later.
#[derive(Debug, Clone)]
pub struct BroadcastRecord {
    pub seq: u32,
    pub members: BTreeSet<String>,
    pub pub_info: PublicInfo,
    pub envelope: Envelope,
    pub plaintext: Vec<u8>,
    pub encrypted: bool,
}

#[derive(Debug, Clone, Default)]
pub struct BroadcastReport {
    pub members: BTreeSet<String>,
    pub delivered: Vec<String>,
    pub failed: Vec<String>,
    pub pubinfo_bytes: usize,
    pub envelope_bytes: usize,
}

struct UtilityNode {
    group: GroupState,
    crp: CrpStore,
    auc: AuthCenter,
    addr: [u8; 8],
    auth_drbg: Drbg,
    uplink_hwm: BTreeMap<String, u64>,
    static_uplink_keys: BTreeMap<String, [u8; 16]>,
    bcast_counter: u64,
    /// Members covered by the current key epoch.
    epoch_members: BTreeSet<String>,
}

struct CollectorNode {
    sim_card: SimCard,
    link: LinkSession,
    gprs_transcript: Transcript,
    observed: Vec<Vec<u8>>,
    sessions_in_use: u32,
    sessions_by_source: BTreeMap<String, u32>,
}

struct MeterNode {
    id: String,
    addr: [u8; 8],
    puf: SimPuf,
    c0: [u8; 16],
    feedback_iterations: u32,
    board: MeterBoard,
    /// Ever set up (keeps stale state after revocation).
    provisioned: bool,
    /// Currently in the utility's secret table.
    enrolled: bool,
    authenticated: bool,
    frame_counter: u64,
    static_key: bool,
    crt_modulus: Option<BigUint>,
    /// Bytes this meter saw while relaying for others.
    observed: Vec<Vec<u8>>,
    /// Latest public info this meter received, kept after revocation.
    stale_pub_info: Option<PublicInfo>,
}

impl MeterNode {
    /// Reconstruct this meter's long-term secret: regenerated on demand
    /// from the device function, or read from the board tables on
    /// static-key meters. The regenerating path stores no secret at rest.
    fn bgkm_secret(&mut self) -> Option<[u8; 32]> {
        if !self.provisioned {
            return None;
        }
        if self.static_key {
            let stored = self.board.tables.extended_keys.first()?;
            stored.as_slice().try_into().ok()
        } else {
            self.puf.feedback_secret(&self.c0, self.feedback_iterations).ok()
        }
    }

    fn secret_struct(&mut self) -> Option<MeterSecret> {
        Some(MeterSecret {
            meter_id: MeterId(self.id.clone()),
            s: self.bgkm_secret()?,
            crt_modulus: self.crt_modulus.clone(),
        })
    }

    /// Attempt to derive the group key from public info and open an
    /// envelope with it.
    fn try_open(
        &mut self,
        pub_info: &PublicInfo,
        envelope: &Envelope,
        params: &bgkm::SecurityParams,
    ) -> Option<Vec<u8>> {
        let secret = self.secret_struct()?;
        let key = bgkm::key_der(&secret, pub_info, params).ok()?;
        aead::open(&bgkm::payload_key(&key), envelope).ok()
    }
}

/// Ground-truth material the harness uses to adjudicate attacks and scan
/// for leaks. Not part of any protocol surface.
#[derive(Debug, Clone, Default)]
pub struct GroundTruth {
    pub puf_seeds: BTreeMap<String, [u8; 32]>,
    pub collector_kis: BTreeMap<String, [u8; 16]>,
}

pub struct Simulation {
    topo: Topology,
    pub params: SimParams,
    clock: u64,
    utility: UtilityNode,
    collectors: BTreeMap<String, CollectorNode>,
    meters: BTreeMap<String, MeterNode>,
    addr_to_meter: BTreeMap<[u8; 8], String>,
    queue: VecDeque<ScenarioEvent>,
    pub log: EventLog,
    pub metrics: SimMetrics,
    archive: Vec<BroadcastRecord>,
    last_broadcast: Option<BroadcastReport>,
    attack_verdicts: BTreeMap<String, Verdict>,
    assertion_failures: Vec<String>,
    attacker_drbg: Drbg,
    ground_truth: GroundTruth,
}

impl Simulation {
    /// Build all nodes from a scenario. Randomness (device seeds, link
    /// keys, the controller's generator) is drawn from one master
    /// generator in sorted node order, so equal seeds give equal networks.
    pub fn new(scenario: &Scenario, seed: u64) -> Result<Simulation, SimError> {
        let topo = Topology::build(&scenario.nodes)?;
        let params = scenario.params.clone();
        let mut master = Drbg::from_u64(seed);

        let group_seed = master.gen::<32>();
        let auth_drbg = master.fork();
        let group = GroupState::setup(params.security.clone(), params.backend, group_seed)?;
        let mut utility = UtilityNode {
            group,
            crp: CrpStore::new(),
            auc: AuthCenter::new(),
            addr: hash::node_addr(topo.utility()),
            auth_drbg,
            uplink_hwm: BTreeMap::new(),
            static_uplink_keys: BTreeMap::new(),
            bcast_counter: 0,
            epoch_members: BTreeSet::new(),
        };

        let mut collectors = BTreeMap::new();
        let mut ground_truth = GroundTruth::default();
        for cid in topo.collectors() {
            let ki: [u8; 16] = master.gen();
            let imsi = format!("imsi-{cid}");
            utility.auc.register(&imsi, ki);
            let mut sim_card = SimCard::new(imsi, ki, [0, 0, 0, 0]);
            sim_card.unlock([0, 0, 0, 0]).expect("factory pin");
            ground_truth.collector_kis.insert(cid.clone(), ki);
            collectors.insert(
                cid.clone(),
                CollectorNode {
                    sim_card,
                    link: LinkSession::new(),
                    gprs_transcript: Transcript::new(),
                    observed: Vec::new(),
                    sessions_in_use: 0,
                    sessions_by_source: BTreeMap::new(),
                },
            );
        }

        let mut meters = BTreeMap::new();
        let mut addr_to_meter = BTreeMap::new();
        for mid in topo.meters() {
            let puf_seed: [u8; 32] = master.gen();
            let c0: [u8; 16] = master.gen();
            ground_truth.puf_seeds.insert(mid.clone(), puf_seed);
            let addr = hash::node_addr(mid);
            addr_to_meter.insert(addr, mid.clone());
            meters.insert(
                mid.clone(),
                MeterNode {
                    id: mid.clone(),
                    addr,
                    puf: SimPuf::new(mid.clone(), puf_seed),
                    c0,
                    feedback_iterations: params.feedback_iterations,
                    board: MeterBoard::new(),
                    provisioned: false,
                    enrolled: false,
                    authenticated: false,
                    frame_counter: 0,
                    static_key: topo.is_static_meter(mid),
                    crt_modulus: None,
                    observed: Vec::new(),
                    stale_pub_info: None,
                },
            );
        }
        let attacker_drbg = master.fork();

        Ok(Simulation {
            topo,
            params,
            clock: 0,
            utility,
            collectors,
            meters,
            addr_to_meter,
            queue: scenario.events.iter().cloned().collect(),
            log: EventLog::new(),
            metrics: SimMetrics::default(),
            archive: Vec::new(),
            last_broadcast: None,
            attack_verdicts: BTreeMap::new(),
            assertion_failures: Vec::new(),
            attacker_drbg,
            ground_truth,
        })
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn ground_truth(&self) -> &GroundTruth {
        &self.ground_truth
    }

    pub fn attacker_drbg(&mut self) -> &mut Drbg {
        &mut self.attacker_drbg
    }

    pub fn archive(&self) -> &[BroadcastRecord] {
        &self.archive
    }

    pub fn last_broadcast(&self) -> Option<&BroadcastReport> {
        self.last_broadcast.as_ref()
    }

    pub fn assertion_failures(&self) -> &[String] {
        &self.assertion_failures
    }

    pub fn attack_verdict(&self, scenario: &str) -> Option<Verdict> {
        self.attack_verdicts.get(scenario).copied()
    }

    pub fn enrolled_meters(&self) -> BTreeSet<String> {
        self.meters
            .values()
            .filter(|m| m.enrolled)
            .map(|m| m.id.clone())
            .collect()
    }

    pub fn is_enrolled(&self, meter: &str) -> bool {
        self.meters.get(meter).is_some_and(|m| m.enrolled)
    }

    fn meter_mut(&mut self, id: &str) -> Result<&mut MeterNode, SimError> {
        self.meters
            .get_mut(id)
            .ok_or_else(|| SimError::NotAMeter(id.to_string()))
    }

    /// Install a meter: store its enrollment record, register its
    /// long-term secret (generated on the device and carried once over the
    /// trusted installation channel), and run the install-time
    /// authentication round.
    pub fn enroll_meter(&mut self, id: &str) -> Result<(), SimError> {
        let tick = self.clock;
        let meter = self
            .meters
            .get_mut(id)
            .ok_or_else(|| SimError::NotAMeter(id.to_string()))?;
        // A re-joining meter keeps its original enrollment record; the
        // group-level duplicate check below still rejects double joins.
        if !self.utility.crp.contains(id) {
            let crp = self.utility.crp.enroll(&mut meter.puf, &mut self.utility.auth_drbg)?;
            debug_assert_eq!(crp.device_id, id);
        }

        let mode = if meter.static_key {
            // Legacy device: everything it needs lives in its board tables,
            // in cleartext.
            let secret = self.utility.group.sec_gen(&MeterId(id.to_string()))?.clone();
            let uplink_key: [u8; 16] = self.utility.auth_drbg.gen();
            self.utility
                .static_uplink_keys
                .insert(id.to_string(), uplink_key);
            meter.board.tables.keys.clear();
            meter.board.tables.extended_keys.clear();
            meter.board.tables.keys.push(uplink_key);
            meter.board.tables.extended_keys.push(secret.s.to_vec());
            if let Some(m) = &secret.crt_modulus {
                meter.board.tables.extended_keys.push(m.to_bytes_be());
            }
            meter.crt_modulus = secret.crt_modulus.clone();
            "static"
        } else {
            // Secret regenerated on demand; the meter retains only the
            // initial challenge and the iteration count.
            let s = meter
                .puf
                .feedback_secret(&meter.c0, meter.feedback_iterations)?;
            let secret = self.utility.group.register_secret(&MeterId(id.to_string()), s)?;
            meter.crt_modulus = secret.crt_modulus.clone();
            "puf"
        };
        meter.provisioned = true;
        meter.enrolled = true;
        self.log.push(tick, id, "ENROLL", &format!("OK({mode})"), 0);

        let outcome = self.utility.crp.authenticate(id, &mut meter.puf)?;
        meter.authenticated = outcome == AuthOutcome::Accept;
        self.record_auth(tick, id, outcome, false);
        Ok(())
    }

    fn record_auth(&mut self, tick: u64, id: &str, outcome: AuthOutcome, hardened: bool) {
        let label = match (outcome, hardened) {
            (AuthOutcome::Accept, false) => "ACCEPT",
            (AuthOutcome::Accept, true) => "ACCEPT(hardened)",
            (AuthOutcome::Reject, false) => "REJECT",
            (AuthOutcome::Reject, true) => "REJECT(hardened)",
        };
        if outcome == AuthOutcome::Accept {
            self.metrics.auth_accepts += 1;
        } else {
            self.metrics.auth_rejects += 1;
        }
        self.log.push(tick, id, "AUTH", label, 0);
    }

    /// Re-run device authentication for an installed meter.
    pub fn authenticate_meter(&mut self, id: &str, hardened: bool) -> Result<AuthOutcome, SimError> {
        let tick = self.clock;
        let meter = self
            .meters
            .get_mut(id)
            .ok_or_else(|| SimError::NotAMeter(id.to_string()))?;
        let outcome = if hardened {
            self.utility
                .crp
                .authenticate_hardened(id, &mut meter.puf, &mut self.utility.auth_drbg)?
        } else {
            self.utility.crp.authenticate(id, &mut meter.puf)?
        };
        self.meters.get_mut(id).unwrap().authenticated = outcome == AuthOutcome::Accept;
        self.record_auth(tick, id, outcome, hardened);
        Ok(outcome)
    }

    /// Authenticate an arbitrary responder claiming to be `id` (attacker
    /// entry point for the threat harness).
    pub fn authenticate_responder(
        &mut self,
        id: &str,
        responder: &mut dyn ChallengeResponder,
        hardened: bool,
    ) -> Result<AuthOutcome, SimError> {
        let tick = self.clock;
        let outcome = if hardened {
            self.utility
                .crp
                .authenticate_hardened(id, responder, &mut self.utility.auth_drbg)?
        } else {
            self.utility.crp.authenticate(id, responder)?
        };
        self.record_auth(tick, id, outcome, hardened);
        Ok(outcome)
    }

    /// The enrollment record for a device, as an on-path eavesdropper of
    /// the baseline authentication exchange would have captured it.
    pub fn sniff_auth_exchange(&self, id: &str) -> Option<([u8; 16], [u8; 16])> {
        self.utility
            .crp
            .record(id)
            .map(|crp| (crp.challenge, crp.response))
    }

    fn rekey_over_enrolled(&mut self, tick: u64) -> Result<(), SimError> {
        let target = self.enrolled_meters();
        if target.is_empty() {
            self.utility.epoch_members.clear();
            self.log.push(tick, self.topo.utility(), "REKEY", "SKIPPED_EMPTY", 0);
            return Ok(());
        }
        let retained_before: Vec<(String, Vec<u8>)> = target
            .iter()
            .filter_map(|id| {
                self.utility
                    .group
                    .secret(&MeterId(id.clone()))
                    .map(|s| (id.clone(), s.to_bytes()))
            })
            .collect();
        let member_ids: BTreeSet<MeterId> = target.iter().map(|m| MeterId(m.clone())).collect();
        let (_, info) = self.utility.group.re_key(&member_ids)?;
        let touched = retained_before
            .iter()
            .filter(|(id, before)| {
                self.utility
                    .group
                    .secret(&MeterId(id.clone()))
                    .map(|s| s.to_bytes() != *before)
                    .unwrap_or(true)
            })
            .count() as u64;
        self.metrics.rekey_count += 1;
        self.metrics.meters_touched_per_rekey.push(touched);
        self.utility.epoch_members = target;
        self.log.push(
            tick,
            self.topo.utility(),
            "REKEY",
            &format!("OK seq={} touched={touched}", info.seq),
            info.to_bytes().len(),
        );
        Ok(())
    }

    /// Explicit re-key over the currently enrolled set.
    pub fn rekey(&mut self) -> Result<(), SimError> {
        let tick = self.clock;
        self.rekey_over_enrolled(tick)
    }

    /// Remove a meter from the group. With forward or backward secrecy the
    /// group is re-keyed immediately, before any further broadcast; with
    /// none the stale epoch key stays in service (deliberately insecure,
    /// exercised by the threat harness).
    pub fn revoke_meter(&mut self, id: &str, secrecy: Secrecy) -> Result<(), SimError> {
        let tick = self.clock;
        if !self.meters.contains_key(id) {
            return Err(SimError::NotAMeter(id.to_string()));
        }
        self.utility.group.remove_member(&MeterId(id.to_string()))?;
        self.utility.static_uplink_keys.remove(id);
        let meter = self.meters.get_mut(id).unwrap();
        meter.enrolled = false;
        self.log.push(
            tick,
            id,
            "REVOKE",
            &format!("OK secrecy={secrecy:?}"),
            0,
        );
        if secrecy.rekeys() {
            self.rekey_over_enrolled(tick)?;
        }
        Ok(())
    }

    /// Enroll an additional meter; with backward (or forward) secrecy the
    /// group re-keys so the joiner cannot read earlier epochs and starts
    /// participating immediately.
    pub fn join_meter(&mut self, id: &str, secrecy: Secrecy) -> Result<(), SimError> {
        let tick = self.clock;
        self.enroll_meter(id)?;
        self.log.push(tick, id, "JOIN", &format!("OK secrecy={secrecy:?}"), 0);
        if secrecy.rekeys() {
            self.rekey_over_enrolled(tick)?;
        }
        Ok(())
    }

    /// Broadcast a payload to a member set (default: everyone enrolled).
    ///
    /// The current epoch key is reused when it still covers the whole
    /// target set; otherwise a fresh key generation runs first. Public
    /// info and the sealed envelope flood through collectors and relays;
    /// every provisioned meter attempts derivation, which doubles as the
    /// epoch-membership check.
    pub fn broadcast(
        &mut self,
        members: Option<BTreeSet<String>>,
        message: &str,
    ) -> Result<BroadcastReport, SimError> {
        let tick = self.clock;
        let target = members.unwrap_or_else(|| self.enrolled_meters());
        if target.is_empty() {
            self.log.push(tick, self.topo.utility(), "BROADCAST", "EMPTY_NOOP", 0);
            let report = BroadcastReport::default();
            self.last_broadcast = Some(report.clone());
            return Ok(report);
        }
        for id in &target {
            let meter = self
                .meters
                .get(id)
                .ok_or_else(|| SimError::NotAMeter(id.clone()))?;
            if !meter.enrolled || !meter.authenticated {
                return Err(SimError::NotProvisioned(id.clone()));
            }
        }

        let covers = !self.utility.epoch_members.is_empty()
            && target.is_subset(&self.utility.epoch_members)
            && self.utility.group.current().is_some();
        if !covers {
            let member_ids: BTreeSet<MeterId> =
                target.iter().map(|m| MeterId(m.clone())).collect();
            self.utility.group.key_gen(&member_ids)?;
            self.utility.epoch_members = target.clone();
        }
        let (key, info) = self.utility.group.current().unwrap().clone();

        let plaintext = message.as_bytes().to_vec();
        self.utility.bcast_counter += 1;
        let nonce = aead::nonce_for(&self.utility.addr, self.utility.bcast_counter);
        let header = format!("bcast seq={}", info.seq).into_bytes();
        let envelope = if self.params.encryption {
            aead::seal(&bgkm::payload_key(&key), nonce, &header, &plaintext)
        } else {
            // Control mode for the threat harness: payload in the clear.
            Envelope {
                nonce,
                header,
                ciphertext: plaintext.clone(),
                tag: [0u8; 16],
            }
        };

        let info_bytes = info.to_bytes();
        let env_bytes = envelope.to_bytes();
        let mut wire = info_bytes.clone();
        wire.extend_from_slice(&env_bytes);
        self.metrics.broadcasts += 1;
        self.metrics.pubinfo_bytes.push(info_bytes.len());
        self.log.push(
            tick,
            self.topo.utility(),
            "BROADCAST",
            &format!(
                "SENT seq={} members={}{}",
                info.seq,
                target.len(),
                if self.params.encryption { "" } else { " PLAINTEXT" }
            ),
            wire.len(),
        );

        // Store-and-forward through every collector.
        let collector_ids: Vec<String> = self.collectors.keys().cloned().collect();
        for cid in &collector_ids {
            let arrival = tick + self.topo.collector_delay(cid);
            self.collectors.get_mut(cid).unwrap().observed.push(wire.clone());
            self.log.push(arrival, cid, "FORWARD", "STORE_AND_FORWARD", wire.len());
        }

        // Deliveries, ordered by (arrival tick, meter id) for a stable log.
        let mut deliveries: Vec<(u64, String)> = Vec::new();
        for mid in self.topo.meters() {
            let (relays, cid, path_delay) = self.topo.uplink_route(mid).unwrap();
            let arrival = tick + self.topo.collector_delay(&cid) + path_delay;
            for relay in relays {
                self.meters.get_mut(&relay).unwrap().observed.push(wire.clone());
            }
            deliveries.push((arrival, mid.clone()));
        }
        deliveries.sort();

        let mut report = BroadcastReport {
            members: target.clone(),
            pubinfo_bytes: info_bytes.len(),
            envelope_bytes: env_bytes.len(),
            ..BroadcastReport::default()
        };
        for (arrival, mid) in deliveries {
            let meter = self.meters.get_mut(&mid).unwrap();
            let is_member = target.contains(&mid);
            let outcome = if !meter.provisioned {
                "RECEIVED_UNPROVISIONED"
            } else if !self.params.encryption {
                meter.stale_pub_info = Some(info.clone());
                if is_member {
                    report.delivered.push(mid.clone());
                }
                "PLAINTEXT_READ"
            } else {
                let opened = meter.try_open(&info, &envelope, &self.params.security);
                meter.stale_pub_info = Some(info.clone());
                match (opened, is_member) {
                    (Some(p), true) => {
                        debug_assert_eq!(p, plaintext);
                        report.delivered.push(mid.clone());
                        "OPENED"
                    }
                    (Some(_), false) => "OPENED_NOT_MEMBER",
                    (None, true) => {
                        self.metrics.envelopes_rejected += 1;
                        report.failed.push(mid.clone());
                        "AUTH_FAILURE"
                    }
                    (None, false) => {
                        self.metrics.envelopes_rejected += 1;
                        "AUTH_FAILURE_NOT_MEMBER"
                    }
                }
            };
            self.log.push(arrival, &mid, "DELIVER", outcome, env_bytes.len());
        }

        self.archive.push(BroadcastRecord {
            seq: info.seq,
            members: target,
            pub_info: info,
            envelope,
            plaintext,
            encrypted: self.params.encryption,
        });
        self.last_broadcast = Some(report.clone());
        Ok(report)
    }

    /// Can `meter` open an archived broadcast with what it knows right now?
    pub fn meter_opens_archived(&mut self, meter: &str, which: BroadcastRef) -> Option<bool> {
        let record = match which {
            BroadcastRef::Last => self.archive.last().cloned()?,
            BroadcastRef::Index(i) => self.archive.get(i).cloned()?,
        };
        if !record.encrypted {
            return Some(true);
        }
        let params = self.params.security.clone();
        let m = self.meters.get_mut(meter)?;
        Some(
            m.try_open(&record.pub_info, &record.envelope, &params)
                .is_some_and(|p| p == record.plaintext),
        )
    }

    /// Per-meter uplink key: bound to the long-term secret and the frame
    /// counter, so every report uses a fresh key and a fresh nonce.
    fn uplink_key(secret: &[u8; 32], counter: u32) -> [u8; 16] {
        hash::digest16(&[&[TAG_UPLINK_KEY], secret, &counter.to_be_bytes()])
    }

    /// Send one meter reading up to the utility. Returns the utility's
    /// verdict and the envelope wire bytes (what an on-path attacker
    /// captures).
    pub fn report_uplink(
        &mut self,
        meter_id: &str,
        reading: &str,
    ) -> Result<(UplinkOutcome, Vec<u8>), SimError> {
        let tick = self.clock;
        let (relays, cid, path_delay) = self
            .topo
            .uplink_route(meter_id)
            .ok_or_else(|| SimError::NotAMeter(meter_id.to_string()))?;
        let meter = self.meter_mut(meter_id)?;
        if !meter.provisioned {
            return Err(SimError::NotProvisioned(meter_id.to_string()));
        }
        meter.frame_counter += 1;
        let counter = meter.frame_counter;
        let plaintext = format!("READING meter={meter_id} value={reading}");

        let envelope = if meter.static_key {
            let key = meter.board.tables.keys[0];
            // Legacy design: the key itself crosses the board-to-board
            // serial link for the communication board to use.
            meter.board.serial_transfer("uplink_key", &key);
            aead::seal(
                &key,
                aead::nonce_for(&meter.addr, counter),
                meter_id.as_bytes(),
                plaintext.as_bytes(),
            )
        } else {
            let secret = meter
                .bgkm_secret()
                .ok_or_else(|| SimError::NotProvisioned(meter_id.to_string()))?;
            let key = Self::uplink_key(&secret, counter as u32);
            let env = aead::seal(
                &key,
                aead::nonce_for(&meter.addr, counter),
                meter_id.as_bytes(),
                plaintext.as_bytes(),
            );
            // Only ciphertext crosses the serial link on this design.
            meter.board.serial_transfer("envelope", &env.to_bytes());
            env
        };
        let wire = envelope.to_bytes();
        self.log.push(tick, meter_id, "REPORT", &format!("SENT ctr={counter}"), wire.len());

        for relay in &relays {
            self.meters.get_mut(relay).unwrap().observed.push(wire.clone());
            self.log.push(tick + 1, relay, "FORWARD", "RELAYED", wire.len());
        }
        let outcome = self.forward_via_collector(&cid, meter_id, &wire, tick + path_delay)?;
        Ok((outcome, wire))
    }

    /// Collector ingress + link leg + utility processing for an uplink
    /// envelope. Also the attacker's replay entry point.
    pub fn forward_via_collector(
        &mut self,
        cid: &str,
        source: &str,
        wire: &[u8],
        arrival: u64,
    ) -> Result<UplinkOutcome, SimError> {
        let collector_delay = self.topo.collector_delay(cid);
        let collector = self
            .collectors
            .get_mut(cid)
            .ok_or_else(|| SimError::UnknownNode(cid.to_string()))?;
        if collector.sessions_in_use >= self.params.session_cap {
            self.log.push(arrival, cid, "FORWARD", "DROPPED_BUSY", wire.len());
            return Ok(UplinkOutcome::DroppedBusy);
        }
        collector.observed.push(wire.to_vec());
        self.log.push(
            arrival,
            cid,
            "FORWARD",
            &format!("STORE_AND_FORWARD src={source}"),
            wire.len(),
        );

        // Link-layer session to the utility; handshake on first use.
        if !collector.link.is_authenticated() {
            let (session, outcome) = run_handshake(
                &self.utility.auc,
                &collector.sim_card,
                &mut self.utility.auth_drbg,
                &mut collector.gprs_transcript,
            )?;
            debug_assert_eq!(outcome, LinkOutcome::Accept);
            collector.link = session;
            self.log.push(arrival, cid, "LINKAUTH", "ACCEPT", 0);
        }
        let frame = collector.link.send(Direction::Uplink, wire);
        collector
            .gprs_transcript
            .record(Direction::Uplink, if frame.ciphered { "data_frame" } else { "data_frame_plaintext" }, &frame.body);
        let env_bytes = match collector.link.kc() {
            Some(kc) => decipher_frame(kc, &frame),
            None => frame.body.clone(),
        };
        let outcome = self.utility_process_uplink(&env_bytes, arrival + collector_delay);
        Ok(outcome)
    }

    fn utility_process_uplink(&mut self, env_bytes: &[u8], arrival: u64) -> UplinkOutcome {
        let unode = self.topo.utility().to_string();
        let envelope = match Envelope::from_bytes(env_bytes) {
            Ok(e) => e,
            Err(_) => {
                self.log.push(arrival, &unode, "UPLINK", UplinkOutcome::Malformed.label(), env_bytes.len());
                return UplinkOutcome::Malformed;
            }
        };
        let sender_addr: [u8; 8] = envelope.nonce[..8].try_into().unwrap();
        let Some(meter_id) = self.addr_to_meter.get(&sender_addr).cloned() else {
            self.log.push(arrival, &unode, "UPLINK", UplinkOutcome::UnknownSender.label(), env_bytes.len());
            return UplinkOutcome::UnknownSender;
        };
        let counter = u64::from_be_bytes(envelope.nonce[8..].try_into().unwrap());

        let key = if let Some(k) = self.utility.static_uplink_keys.get(&meter_id) {
            Some(*k)
        } else {
            self.utility
                .group
                .secret(&MeterId(meter_id.clone()))
                .map(|sec| Self::uplink_key(&sec.s, counter as u32))
        };
        let outcome = match key {
            None => UplinkOutcome::AuthFailure,
            Some(key) => match aead::open(&key, &envelope) {
                Err(_) => UplinkOutcome::AuthFailure,
                Ok(_plaintext) => {
                    let hwm = self.utility.uplink_hwm.entry(meter_id.clone()).or_insert(0);
                    if self.params.counters && counter <= *hwm {
                        UplinkOutcome::ReplayRejected
                    } else {
                        *hwm = (*hwm).max(counter);
                        UplinkOutcome::Accepted
                    }
                }
            },
        };
        match outcome {
            UplinkOutcome::Accepted => self.metrics.uplinks_accepted += 1,
            UplinkOutcome::ReplayRejected => self.metrics.replay_rejected += 1,
            UplinkOutcome::AuthFailure => self.metrics.envelopes_rejected += 1,
            _ => {}
        }
        self.log.push(
            arrival,
            &unode,
            "UPLINK",
            &format!("{} from={meter_id} ctr={counter}", outcome.label()),
            env_bytes.len(),
        );
        outcome
    }

    /// Open attacker sessions against a collector. Returns how many were
    /// admitted. With throttling on, a single source is capped well below
    /// the collector-wide session limit.
    pub fn flood_collector_sessions(&mut self, cid: &str, source: &str, n: u32) -> Result<u32, SimError> {
        let tick = self.clock;
        let per_source_cap = 3;
        let cap = self.params.session_cap;
        let throttle = self.params.throttle;
        let collector = self
            .collectors
            .get_mut(cid)
            .ok_or_else(|| SimError::UnknownNode(cid.to_string()))?;
        let mut admitted = 0;
        for _ in 0..n {
            let per_source = collector.sessions_by_source.entry(source.to_string()).or_insert(0);
            if throttle && *per_source >= per_source_cap {
                break;
            }
            if collector.sessions_in_use >= cap {
                break;
            }
            *per_source += 1;
            collector.sessions_in_use += 1;
            admitted += 1;
        }
        self.log.push(
            tick,
            cid,
            "SESSIONS",
            &format!("OPEN source={source} admitted={admitted} in_use={}", collector.sessions_in_use),
            0,
        );
        Ok(admitted)
    }

    pub fn release_collector_sessions(&mut self, cid: &str) -> Result<(), SimError> {
        let collector = self
            .collectors
            .get_mut(cid)
            .ok_or_else(|| SimError::UnknownNode(cid.to_string()))?;
        collector.sessions_in_use = 0;
        collector.sessions_by_source.clear();
        Ok(())
    }

    /// Everything an attacker sitting at a collector has observed.
    pub fn collector_observed(&self, cid: &str) -> Vec<u8> {
        let mut out = Vec::new();
        if let Some(c) = self.collectors.get(cid) {
            for w in &c.observed {
                out.extend_from_slice(w);
            }
            for l in c.gprs_transcript.lines() {
                out.extend_from_slice(l.as_bytes());
                out.push(b'\n');
            }
        }
        out
    }

    pub fn relay_observed(&self, meter: &str) -> Vec<u8> {
        self.meters
            .get(meter)
            .map(|m| m.observed.concat())
            .unwrap_or_default()
    }

    pub fn gprs_transcript_lines(&self, cid: &str) -> Vec<String> {
        self.collectors
            .get(cid)
            .map(|c| c.gprs_transcript.lines().to_vec())
            .unwrap_or_default()
    }

    /// Issue a link-layer challenge to a collector's subscriber module as
    /// an unauthenticated party would, harvesting the signed response.
    pub fn challenge_collector_sim(&mut self, cid: &str, rand: &[u8; 16]) -> Result<[u8; 4], SimError> {
        let tick = self.clock;
        let collector = self
            .collectors
            .get_mut(cid)
            .ok_or_else(|| SimError::UnknownNode(cid.to_string()))?;
        let sres = collector.sim_card.response(rand);
        collector
            .gprs_transcript
            .record(Direction::Downlink, "challenge", rand);
        collector
            .gprs_transcript
            .record(Direction::Uplink, "signed_response", &sres);
        self.log.push(tick, cid, "LINKAUTH", "CHALLENGED_BY_UNVERIFIED_PARTY", 0);
        Ok(sres)
    }

    /// Ground-truth check: is (rand, sres) a valid pair for this
    /// collector's subscriber key? Used by the harness to adjudicate
    /// harvesting attacks; an attacker cannot run this.
    pub fn verify_harvested_pair(&mut self, cid: &str, rand: &[u8; 16], sres: &[u8; 4]) -> bool {
        let Some(ki) = self.ground_truth.collector_kis.get(cid) else {
            return false;
        };
        let sim = SimCard::new("ground-truth", *ki, [0, 0, 0, 0]);
        sim.response(rand) == *sres
    }

    /// Grant physical access and dump a meter (threat-harness entry).
    pub fn physical_dump_meter(&mut self, meter: &str) -> Result<(Vec<u8>, Vec<u8>), SimError> {
        use gridkey_core::meterstate::DumpSurface;
        let tick = self.clock;
        let m = self.meter_mut(meter)?;
        let memory = m.board.physical_dump(DumpSurface::Memory, true).unwrap();
        let serial = m.board.physical_dump(DumpSurface::SerialBus, true).unwrap();
        self.log.push(tick, meter, "DUMP", "PHYSICAL_ACCESS", memory.len() + serial.len());
        Ok((memory, serial))
    }

    pub fn meter_board(&self, meter: &str) -> Option<&MeterBoard> {
        self.meters.get(meter).map(|m| &m.board)
    }

    pub fn meter_board_mut(&mut self, meter: &str) -> Option<&mut MeterBoard> {
        self.meters.get_mut(meter).map(|m| &mut m.board)
    }

    /// Current group key and public info (harness ground truth).
    pub fn current_epoch(&self) -> Option<(GroupKey, PublicInfo)> {
        self.utility.group.current().cloned()
    }

    pub fn group_params(&self) -> &bgkm::SecurityParams {
        &self.utility.group.params
    }

    /// Long-term secrets the utility holds (harness ground truth).
    pub fn utility_secret(&self, meter: &str) -> Option<MeterSecret> {
        self.utility.group.secret(&MeterId(meter.to_string())).cloned()
    }

    /// Secret material a meter can still produce on its own, even after
    /// the utility revoked it (the device keeps regenerating).
    pub fn revoked_meter_secret(&mut self, meter: &str) -> Option<MeterSecret> {
        self.meters.get_mut(meter).and_then(|m| m.secret_struct())
    }

    pub fn utility_member_count(&self) -> usize {
        self.utility.group.member_count()
    }

    /// Serialized secrets of all currently enrolled members, for re-key
    /// locality checks.
    pub fn serialized_secrets(&self) -> BTreeMap<String, Vec<u8>> {
        self.enrolled_meters()
            .into_iter()
            .filter_map(|id| {
                self.utility
                    .group
                    .secret(&MeterId(id.clone()))
                    .map(|s| (id, s.to_bytes()))
            })
            .collect()
    }

    /// All bytes this run has emitted anywhere an observer could read
    /// them: logs, metrics, wire captures, transcripts, the enrollment
    /// store, and board snapshots.
    pub fn all_emitted_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(self.log.to_text().as_bytes());
        out.extend_from_slice(self.metrics.to_text().as_bytes());
        out.extend_from_slice(&self.utility.crp.to_bytes());
        for cid in self.collectors.keys() {
            out.extend_from_slice(&self.collector_observed(cid));
        }
        for m in self.meters.values() {
            out.extend_from_slice(&m.observed.concat());
            out.extend_from_slice(m.board.snapshot().as_bytes());
            out.extend_from_slice(m.board.serial_log());
        }
        for rec in &self.archive {
            out.extend_from_slice(&rec.pub_info.to_bytes());
            out.extend_from_slice(&rec.envelope.to_bytes());
        }
        out
    }

    fn check_assert(&mut self, check: &AssertCheck) -> Result<(), String> {
        match check {
            AssertCheck::Delivered(n) => {
                let got = self
                    .last_broadcast
                    .as_ref()
                    .map(|r| r.delivered.len() as u64)
                    .unwrap_or(0);
                if got == *n {
                    Ok(())
                } else {
                    Err(format!("delivered {got}, expected {n}"))
                }
            }
            AssertCheck::Opens {
                meter,
                which,
                expect,
            } => match self.meter_opens_archived(meter, *which) {
                Some(got) if got == *expect => Ok(()),
                Some(got) => Err(format!("{meter} opens={got}, expected {expect}")),
                None => Err(format!("no archived broadcast for {meter}")),
            },
            AssertCheck::Metric { key, value } => match self.metrics.get(key) {
                Some(got) if got == *value => Ok(()),
                Some(got) => Err(format!("metric {key}={got}, expected {value}")),
                None => Err(format!("unknown metric {key}")),
            },
            AssertCheck::Verdict { scenario, expect } => {
                match self.attack_verdicts.get(scenario) {
                    Some(got) if got == expect => Ok(()),
                    Some(got) => Err(format!("verdict {scenario}={got}, expected {expect}")),
                    None => Err(format!("attack {scenario} never ran")),
                }
            }
        }
    }

    fn dispatch(&mut self, op: &EventOp) -> Result<(), SimError> {
        match op {
            EventOp::Enroll { meter } => self.enroll_meter(meter),
            EventOp::Auth { meter, hardened } => {
                self.authenticate_meter(meter, *hardened).map(|_| ())
            }
            EventOp::Broadcast { members, message } => {
                let set = members.as_ref().map(|m| m.iter().cloned().collect());
                self.broadcast(set, message).map(|_| ())
            }
            EventOp::Report { meter, reading } => self.report_uplink(meter, reading).map(|_| ()),
            EventOp::Revoke { meter, secrecy } => {
                self.revoke_meter(meter, secrecy.unwrap_or(self.params.secrecy))
            }
            EventOp::Join { meter, secrecy } => {
                self.join_meter(meter, secrecy.unwrap_or(self.params.secrecy))
            }
            EventOp::Rekey => self.rekey(),
            EventOp::Attack { scenario, modes } => {
                let report = threats::execute(self, scenario, modes)?;
                self.attack_verdicts
                    .insert(scenario.clone(), report.verdict);
                let tick = self.clock;
                self.log.push(
                    tick,
                    "attacker",
                    "ATTACK",
                    &format!("{} {}", scenario, report.verdict),
                    0,
                );
                Ok(())
            }
            EventOp::Assert(check) => {
                let tick = self.clock;
                match self.check_assert(check) {
                    Ok(()) => self.log.push(tick, "harness", "ASSERT", "PASS", 0),
                    Err(msg) => {
                        self.log
                            .push(tick, "harness", "ASSERT", &format!("FAIL {msg}"), 0);
                        self.assertion_failures.push(format!("tick {tick}: {msg}"));
                    }
                }
                Ok(())
            }
        }
    }

    /// Process scripted events up to and including `until_tick` (or all of
    /// them). Operation errors are recorded as failures, not panics, so a
    /// broken scenario still produces a complete log.
    pub fn run(&mut self, until_tick: Option<u64>) {
        while let Some(ev) = self.queue.front() {
            if until_tick.is_some_and(|t| ev.tick > t) {
                break;
            }
            let ev = self.queue.pop_front().unwrap();
            self.clock = ev.tick;
            if let Err(e) = self.dispatch(&ev.op) {
                let tick = self.clock;
                self.log.push(tick, "harness", "ERROR", &e.to_string(), 0);
                self.assertion_failures
                    .push(format!("tick {tick}: event failed: {e}"));
            }
        }
    }
}
