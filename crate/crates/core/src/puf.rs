//! Simulated physically unclonable function and the utility-side
//! challenge-response authentication built on it.
//!
//! Each device owns a hidden 32-byte seed standing in for its physical
//! microstructure; the response to a challenge is a keyed hash of the two.
//! That gives the two properties the authentication relies on — different
//! challenges to one device produce unrelated responses, and one challenge
//! to different devices produces unrelated responses — while keeping the
//! whole system reproducible. Optional per-bit response noise can be
//! enabled; it is off by default.
//!
//! The hidden seed never appears in any serialized output. Devices can
//! regenerate their long-term key-management secret on demand by looping
//! the function output back as the next challenge, so nothing secret has
//! to rest in meter storage.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::drbg::Drbg;
use crate::hash::{self, TAG_BOUND_RESPONSE, TAG_FEEDBACK_SECRET, TAG_PUF_RESPONSE};

pub const CHALLENGE_BYTES: usize = 16;
pub const RESPONSE_BYTES: usize = 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PufError {
    #[error("device {0} is already enrolled")]
    DuplicateEnrollment(String),
    #[error("no challenge-response record for device {0}")]
    UnknownDevice(String),
    #[error("feedback secret generation requires a noise-free device")]
    NoisyPufUnsupported,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuthOutcome {
    Accept,
    Reject,
}

/// Simulated device. `noise_rate` is the independent per-bit flip
/// probability applied to responses; zero means the device is a pure
/// function of (seed, challenge).
#[derive(Debug, Clone)]
pub struct SimPuf {
    device_id: String,
    seed: [u8; 32],
    noise_rate: f64,
    noise: Option<Drbg>,
}

impl SimPuf {
    pub fn new(device_id: impl Into<String>, seed: [u8; 32]) -> SimPuf {
        SimPuf {
            device_id: device_id.into(),
            seed,
            noise_rate: 0.0,
            noise: None,
        }
    }

    pub fn with_noise(mut self, rate: f64, noise_seed: [u8; 32]) -> SimPuf {
        assert!((0.0..0.5).contains(&rate), "noise rate must be in [0, 0.5)");
        self.noise_rate = rate;
        self.noise = if rate > 0.0 {
            Some(Drbg::new(noise_seed))
        } else {
            None
        };
        self
    }

    pub fn device_id(&self) -> &str {
        &self.device_id
    }

    pub fn eval(&mut self, challenge: &[u8; CHALLENGE_BYTES]) -> [u8; RESPONSE_BYTES] {
        let mut response = hash::digest16(&[&[TAG_PUF_RESPONSE], &self.seed, challenge]);
        if let Some(noise) = self.noise.as_mut() {
            let threshold = (self.noise_rate * 4_294_967_296.0) as u64;
            for byte in response.iter_mut() {
                for bit in 0..8 {
                    let draw = u32::from_be_bytes(noise.gen::<4>()) as u64;
                    if draw < threshold {
                        *byte ^= 1 << bit;
                    }
                }
            }
        }
        response
    }

    /// Regenerate the device's 32-byte secret by feeding responses back as
    /// challenges `iterations` times and hashing the final response. Only
    /// defined for noise-free devices: a single flipped bit anywhere in the
    /// chain would change the secret.
    pub fn feedback_secret(
        &mut self,
        c0: &[u8; CHALLENGE_BYTES],
        iterations: u32,
    ) -> Result<[u8; 32], PufError> {
        if self.noise_rate > 0.0 {
            return Err(PufError::NoisyPufUnsupported);
        }
        let mut r = self.eval(c0);
        for _ in 0..iterations {
            r = self.eval(&r);
        }
        Ok(hash::digest(&[&[TAG_FEEDBACK_SECRET], &r]))
    }
}

/// Anything that can answer an authentication challenge: a genuine device,
/// or an attacker model in the threat harness.
pub trait ChallengeResponder {
    fn respond(&mut self, challenge: &[u8; CHALLENGE_BYTES]) -> [u8; RESPONSE_BYTES];

    /// Nonce-bound variant used by hardened authentication.
    fn respond_bound(
        &mut self,
        challenge: &[u8; CHALLENGE_BYTES],
        nonce: &[u8; 16],
    ) -> [u8; RESPONSE_BYTES];
}

impl ChallengeResponder for SimPuf {
    fn respond(&mut self, challenge: &[u8; CHALLENGE_BYTES]) -> [u8; RESPONSE_BYTES] {
        self.eval(challenge)
    }

    fn respond_bound(
        &mut self,
        challenge: &[u8; CHALLENGE_BYTES],
        nonce: &[u8; 16],
    ) -> [u8; RESPONSE_BYTES] {
        let r = self.eval(challenge);
        hash::digest16(&[&[TAG_BOUND_RESPONSE], &r, nonce])
    }
}

/// Enrollment record held by the utility.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChallengeResponsePair {
    pub device_id: String,
    pub challenge: [u8; CHALLENGE_BYTES],
    pub response: [u8; RESPONSE_BYTES],
}

/// Utility-side table of enrollment records.
#[derive(Debug, Clone, Default)]
pub struct CrpStore {
    records: BTreeMap<String, ChallengeResponsePair>,
}

impl CrpStore {
    pub fn new() -> CrpStore {
        CrpStore::default()
    }

    pub fn contains(&self, device_id: &str) -> bool {
        self.records.contains_key(device_id)
    }

    pub fn record(&self, device_id: &str) -> Option<&ChallengeResponsePair> {
        self.records.get(device_id)
    }

    /// Install-time enrollment: draw a fresh challenge, record the device's
    /// response. The device keeps nothing.
    pub fn enroll(
        &mut self,
        device: &mut SimPuf,
        drbg: &mut Drbg,
    ) -> Result<ChallengeResponsePair, PufError> {
        let id = device.device_id().to_string();
        if self.records.contains_key(&id) {
            return Err(PufError::DuplicateEnrollment(id));
        }
        let challenge: [u8; CHALLENGE_BYTES] = drbg.gen();
        let response = device.eval(&challenge);
        let crp = ChallengeResponsePair {
            device_id: id.clone(),
            challenge,
            response,
        };
        self.records.insert(id, crp.clone());
        Ok(crp)
    }

    /// Replay the stored challenge and accept on an exact response match.
    /// This is the baseline mode: an eavesdropper who recorded one round
    /// can answer the (fixed) challenge again.
    pub fn authenticate(
        &self,
        device_id: &str,
        responder: &mut dyn ChallengeResponder,
    ) -> Result<AuthOutcome, PufError> {
        let crp = self
            .records
            .get(device_id)
            .ok_or_else(|| PufError::UnknownDevice(device_id.to_string()))?;
        let reply = responder.respond(&crp.challenge);
        Ok(if reply == crp.response {
            AuthOutcome::Accept
        } else {
            AuthOutcome::Reject
        })
    }

    /// Nonce-bound authentication: the expected reply mixes the stored
    /// response with a fresh nonce, so recorded transcripts stop working.
    pub fn authenticate_hardened(
        &self,
        device_id: &str,
        responder: &mut dyn ChallengeResponder,
        drbg: &mut Drbg,
    ) -> Result<AuthOutcome, PufError> {
        let crp = self
            .records
            .get(device_id)
            .ok_or_else(|| PufError::UnknownDevice(device_id.to_string()))?;
        let nonce: [u8; 16] = drbg.gen();
        let reply = responder.respond_bound(&crp.challenge, &nonce);
        let expected = hash::digest16(&[&[TAG_BOUND_RESPONSE], &crp.response, &nonce]);
        Ok(if reply == expected {
            AuthOutcome::Accept
        } else {
            AuthOutcome::Reject
        })
    }

    /// Record serialization: `id_len(2) || id || C(16) || R(16)` per device.
    /// Hidden device seeds are not part of the store by construction.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for (id, crp) in &self.records {
            out.extend_from_slice(&(id.len() as u16).to_be_bytes());
            out.extend_from_slice(id.as_bytes());
            out.extend_from_slice(&crp.challenge);
            out.extend_from_slice(&crp.response);
        }
        out
    }
}
