//! Link-layer session authentication between a collector and the utility
//! head end, modeled after the subscriber-module triplet flow: the
//! authentication center issues (RAND, SRES, Kc) triplets, the subscriber
//! module answers any challenge with its signed response, and the link is
//! ciphered only once verification completes.
//!
//! The signing and ciphering algorithms are modeled as domain-separated
//! keyed hashes with the real interface widths (16-byte RAND, 4-byte SRES,
//! 8-byte Kc). Authentication is deliberately one-way: the subscriber side
//! never verifies who is asking, and frames sent before the handshake
//! finishes go out unciphered and flagged. Both weaknesses are exercised
//! by the threat harness.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::drbg::Drbg;
use crate::hash::{self, TAG_KC, TAG_LINK_STREAM, TAG_SRES};

pub const RAND_BYTES: usize = 16;
pub const SRES_BYTES: usize = 4;
pub const KC_BYTES: usize = 8;
const PIN_ATTEMPT_LIMIT: u8 = 3;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LinkError {
    #[error("unknown subscriber {0}")]
    UnknownImsi(String),
    #[error("subscriber module is locked")]
    SimLocked,
    #[error("wrong pin ({0} attempts remaining)")]
    BadPin(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuthOutcome {
    Accept,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Direction {
    Uplink,
    Downlink,
}

impl Direction {
    fn tag(self) -> u8 {
        match self {
            Direction::Uplink => 0x00,
            Direction::Downlink => 0x01,
        }
    }
}

fn sres_for(ki: &[u8; 16], rand: &[u8; RAND_BYTES]) -> [u8; SRES_BYTES] {
    let d = hash::digest(&[&[TAG_SRES], ki, rand]);
    d[..SRES_BYTES].try_into().unwrap()
}

fn kc_for(ki: &[u8; 16], rand: &[u8; RAND_BYTES]) -> [u8; KC_BYTES] {
    let d = hash::digest(&[&[TAG_KC], ki, rand]);
    d[..KC_BYTES].try_into().unwrap()
}

/// Subscriber identity module: holds the master key behind a pin with a
/// three-attempt lockout. The key itself never appears in any message.
#[derive(Debug, Clone)]
pub struct SimCard {
    pub imsi: String,
    ki: [u8; 16],
    pin: [u8; 4],
    failed_attempts: u8,
    unlocked: bool,
}

impl SimCard {
    pub fn new(imsi: impl Into<String>, ki: [u8; 16], pin: [u8; 4]) -> SimCard {
        SimCard {
            imsi: imsi.into(),
            ki,
            pin,
            failed_attempts: 0,
            unlocked: false,
        }
    }

    pub fn unlock(&mut self, pin: [u8; 4]) -> Result<(), LinkError> {
        if self.failed_attempts >= PIN_ATTEMPT_LIMIT {
            return Err(LinkError::SimLocked);
        }
        if pin == self.pin {
            self.unlocked = true;
            self.failed_attempts = 0;
            Ok(())
        } else {
            self.failed_attempts += 1;
            if self.failed_attempts >= PIN_ATTEMPT_LIMIT {
                Err(LinkError::SimLocked)
            } else {
                Err(LinkError::BadPin(PIN_ATTEMPT_LIMIT - self.failed_attempts))
            }
        }
    }

    pub fn is_unlocked(&self) -> bool {
        self.unlocked
    }

    /// Signed response to a challenge. The module answers any challenger;
    /// nothing authenticates the network side.
    pub fn response(&self, rand: &[u8; RAND_BYTES]) -> [u8; SRES_BYTES] {
        sres_for(&self.ki, rand)
    }

    /// Ciphering key for the session keyed by this challenge.
    pub fn cipher_key(&self, rand: &[u8; RAND_BYTES]) -> [u8; KC_BYTES] {
        kc_for(&self.ki, rand)
    }
}

/// Authentication triplet issued by the authentication center.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthTriplet {
    pub rand: [u8; RAND_BYTES],
    pub sres: [u8; SRES_BYTES],
    pub kc: [u8; KC_BYTES],
}

/// Head-end authentication center: registered subscriber keys and triplet
/// generation with a fresh challenge per call.
#[derive(Debug, Clone, Default)]
pub struct AuthCenter {
    subscribers: BTreeMap<String, [u8; 16]>,
}

impl AuthCenter {
    pub fn new() -> AuthCenter {
        AuthCenter::default()
    }

    pub fn register(&mut self, imsi: impl Into<String>, ki: [u8; 16]) {
        self.subscribers.insert(imsi.into(), ki);
    }

    pub fn gen_triplet(&self, imsi: &str, drbg: &mut Drbg) -> Result<AuthTriplet, LinkError> {
        let ki = self
            .subscribers
            .get(imsi)
            .ok_or_else(|| LinkError::UnknownImsi(imsi.to_string()))?;
        let rand: [u8; RAND_BYTES] = drbg.gen();
        Ok(AuthTriplet {
            rand,
            sres: sres_for(ki, &rand),
            kc: kc_for(ki, &rand),
        })
    }
}

/// Server-side check: the entire decision is byte equality on the 4-byte
/// signed response.
pub fn verify(received_sres: &[u8; SRES_BYTES], triplet: &AuthTriplet) -> AuthOutcome {
    if *received_sres == triplet.sres {
        AuthOutcome::Accept
    } else {
        AuthOutcome::Reject
    }
}

/// A link frame. Frames sent before authentication completes carry the
/// payload in the clear and say so.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub direction: Direction,
    pub counter: u64,
    pub ciphered: bool,
    pub body: Vec<u8>,
}

/// XOR keystream cipher keyed by (Kc, direction, frame counter).
pub fn cipher_frame(kc: &[u8; KC_BYTES], direction: Direction, counter: u64, payload: &[u8]) -> Frame {
    let mut body = payload.to_vec();
    apply_keystream(kc, direction, counter, &mut body);
    Frame {
        direction,
        counter,
        ciphered: true,
        body,
    }
}

pub fn decipher_frame(kc: &[u8; KC_BYTES], frame: &Frame) -> Vec<u8> {
    let mut body = frame.body.clone();
    if frame.ciphered {
        apply_keystream(kc, frame.direction, frame.counter, &mut body);
    }
    body
}

fn apply_keystream(kc: &[u8; KC_BYTES], direction: Direction, counter: u64, data: &mut [u8]) {
    for (i, chunk) in data.chunks_mut(32).enumerate() {
        let block = hash::digest(&[
            &[TAG_LINK_STREAM],
            kc,
            &[direction.tag()],
            &counter.to_be_bytes(),
            &(i as u32).to_be_bytes(),
        ]);
        for (b, k) in chunk.iter_mut().zip(block.iter()) {
            *b ^= k;
        }
    }
}

/// Session state on the subscriber side of the link.
#[derive(Debug, Clone, Default)]
pub struct LinkSession {
    kc: Option<[u8; KC_BYTES]>,
    tx_counter: u64,
}

impl LinkSession {
    pub fn new() -> LinkSession {
        LinkSession::default()
    }

    pub fn complete_auth(&mut self, kc: [u8; KC_BYTES]) {
        self.kc = Some(kc);
    }

    pub fn is_authenticated(&self) -> bool {
        self.kc.is_some()
    }

    pub fn kc(&self) -> Option<&[u8; KC_BYTES]> {
        self.kc.as_ref()
    }

    /// Send a payload over the link. Before authentication the frame goes
    /// out in the clear, flagged as such.
    pub fn send(&mut self, direction: Direction, payload: &[u8]) -> Frame {
        let counter = self.tx_counter;
        self.tx_counter += 1;
        match self.kc {
            Some(kc) => cipher_frame(&kc, direction, counter, payload),
            None => Frame {
                direction,
                counter,
                ciphered: false,
                body: payload.to_vec(),
            },
        }
    }
}

/// One line per message exchanged during authentication, consumed by the
/// threat harness.
#[derive(Debug, Clone, Default)]
pub struct Transcript {
    lines: Vec<String>,
}

impl Transcript {
    pub fn new() -> Transcript {
        Transcript::default()
    }

    pub fn record(&mut self, direction: Direction, msg_type: &str, payload: &[u8]) {
        let dir = match direction {
            Direction::Uplink => "up",
            Direction::Downlink => "down",
        };
        self.lines
            .push(format!("{dir}\t{msg_type}\t{}", hex::encode(payload)));
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn contains_bytes(&self, needle: &[u8]) -> bool {
        let hex_needle = hex::encode(needle);
        self.lines.iter().any(|l| l.contains(&hex_needle))
    }
}

/// Run the full handshake between an authentication center and a
/// subscriber module, recording every message. Returns the authenticated
/// session on success.
pub fn run_handshake(
    auc: &AuthCenter,
    sim: &SimCard,
    drbg: &mut Drbg,
    transcript: &mut Transcript,
) -> Result<(LinkSession, AuthOutcome), LinkError> {
    transcript.record(Direction::Downlink, "identity_request", sim.imsi.as_bytes());
    let triplet = auc.gen_triplet(&sim.imsi, drbg)?;
    transcript.record(Direction::Downlink, "challenge", &triplet.rand);
    let sres = sim.response(&triplet.rand);
    transcript.record(Direction::Uplink, "signed_response", &sres);
    let outcome = verify(&sres, &triplet);
    let mut session = LinkSession::new();
    if outcome == AuthOutcome::Accept {
        session.complete_auth(sim.cipher_key(&triplet.rand));
    }
    transcript.record(
        Direction::Downlink,
        if outcome == AuthOutcome::Accept {
            "auth_accept"
        } else {
            "auth_reject"
        },
        &[],
    );
    Ok((session, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (AuthCenter, SimCard, Drbg) {
        let mut auc = AuthCenter::new();
        let ki = [0x11u8; 16];
        auc.register("imsi-001", ki);
        (auc, SimCard::new("imsi-001", ki, [1, 2, 3, 4]), Drbg::from_u64(50))
    }

    #[test]
    fn triplets_are_fresh_per_call() {
        let (auc, _, mut drbg) = setup();
        let t1 = auc.gen_triplet("imsi-001", &mut drbg).unwrap();
        let t2 = auc.gen_triplet("imsi-001", &mut drbg).unwrap();
        assert_ne!(t1.rand, t2.rand);
        assert_ne!(t1.kc, t2.kc);
    }

    #[test]
    fn unknown_imsi_rejected() {
        let (auc, _, mut drbg) = setup();
        assert_eq!(
            auc.gen_triplet("imsi-999", &mut drbg).unwrap_err(),
            LinkError::UnknownImsi("imsi-999".into())
        );
    }

    #[test]
    fn genuine_sim_response_verifies() {
        let (auc, sim, mut drbg) = setup();
        let triplet = auc.gen_triplet("imsi-001", &mut drbg).unwrap();
        assert_eq!(verify(&sim.response(&triplet.rand), &triplet), AuthOutcome::Accept);
    }

    #[test]
    fn wrong_key_fails_across_samples() {
        let (auc, _, mut drbg) = setup();
        for i in 0..1000u64 {
            let triplet = auc.gen_triplet("imsi-001", &mut drbg).unwrap();
            let mut wrong_ki = [0u8; 16];
            wrong_ki[..8].copy_from_slice(&i.to_be_bytes());
            let imposter = SimCard::new("imsi-001", wrong_ki, [0, 0, 0, 0]);
            assert_eq!(
                verify(&imposter.response(&triplet.rand), &triplet),
                AuthOutcome::Reject
            );
        }
    }

    #[test]
    fn replayed_sres_fails_against_fresh_challenge() {
        let (auc, sim, mut drbg) = setup();
        let t1 = auc.gen_triplet("imsi-001", &mut drbg).unwrap();
        let recorded = sim.response(&t1.rand);
        let t2 = auc.gen_triplet("imsi-001", &mut drbg).unwrap();
        assert_eq!(verify(&recorded, &t2), AuthOutcome::Reject);
    }

    #[test]
    fn sim_answers_unauthenticated_challengers() {
        // One-way authentication: any party can harvest a signed response.
        let (_, sim, mut attacker_rng) = setup();
        let rogue_rand: [u8; 16] = attacker_rng.gen();
        let sres = sim.response(&rogue_rand);
        assert_eq!(sres, sres_for(&[0x11u8; 16], &rogue_rand));
    }

    #[test]
    fn cipher_roundtrip_and_distinct_keystreams() {
        let kc = [9u8; 8];
        let frame = cipher_frame(&kc, Direction::Uplink, 3, b"meter reading 42");
        assert!(frame.ciphered);
        assert_ne!(frame.body, b"meter reading 42");
        assert_eq!(decipher_frame(&kc, &frame), b"meter reading 42");

        let f1 = cipher_frame(&kc, Direction::Uplink, 1, &[0u8; 32]);
        let f2 = cipher_frame(&kc, Direction::Uplink, 2, &[0u8; 32]);
        let f3 = cipher_frame(&kc, Direction::Downlink, 1, &[0u8; 32]);
        assert_ne!(f1.body, f2.body, "distinct counters, distinct keystream");
        assert_ne!(f1.body, f3.body, "distinct directions, distinct keystream");
    }

    #[test]
    fn pre_auth_frames_are_flagged_plaintext() {
        let mut session = LinkSession::new();
        let frame = session.send(Direction::Uplink, b"early frame");
        assert!(!frame.ciphered);
        assert_eq!(frame.body, b"early frame");
        session.complete_auth([1u8; 8]);
        let frame = session.send(Direction::Uplink, b"later frame");
        assert!(frame.ciphered);
        assert_ne!(frame.body, b"later frame");
    }

    #[test]
    fn kc_values_never_collide_over_many_challenges() {
        let (auc, _, mut drbg) = setup();
        let mut seen = std::collections::HashSet::new();
        for _ in 0..10_000 {
            let t = auc.gen_triplet("imsi-001", &mut drbg).unwrap();
            assert!(seen.insert(t.kc));
        }
    }

    #[test]
    fn pin_lockout_after_three_failures() {
        let (_, mut sim, _) = setup();
        assert_eq!(sim.unlock([0, 0, 0, 0]).unwrap_err(), LinkError::BadPin(2));
        assert_eq!(sim.unlock([0, 0, 0, 0]).unwrap_err(), LinkError::BadPin(1));
        assert_eq!(sim.unlock([0, 0, 0, 0]).unwrap_err(), LinkError::SimLocked);
        assert_eq!(sim.unlock([1, 2, 3, 4]).unwrap_err(), LinkError::SimLocked);
    }

    #[test]
    fn pin_unlock_succeeds_and_resets_counter() {
        let (_, mut sim, _) = setup();
        sim.unlock([9, 9, 9, 9]).unwrap_err();
        sim.unlock([1, 2, 3, 4]).unwrap();
        assert!(sim.is_unlocked());
    }

    #[test]
    fn handshake_produces_authenticated_session_and_transcript() {
        let (auc, sim, mut drbg) = setup();
        let mut transcript = Transcript::new();
        let (session, outcome) = run_handshake(&auc, &sim, &mut drbg, &mut transcript).unwrap();
        assert_eq!(outcome, AuthOutcome::Accept);
        assert!(session.is_authenticated());
        assert_eq!(transcript.lines().len(), 4);
        assert!(transcript.lines()[1].starts_with("down\tchallenge\t"));
    }
}
