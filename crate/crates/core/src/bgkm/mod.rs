//! Broadcast group key management.
//!
//! A controller assigns every member device a long-term secret. To key the
//! group it publishes a single blob of public information from which each
//! current member — and nobody else — derives the group key. Revoking or
//! adding a member only touches the controller's secret table; the other
//! members' secrets never change, and a fresh key generation re-keys the
//! group without any per-member traffic.
//!
//! Two interchangeable backends implement the same five-operation
//! interface (setup, secret assignment, key generation, key derivation,
//! re-key):
//!
//! - [`Backend::Acp`]: a monic polynomial over a prime field whose roots
//!   are the members' hashed evaluation points, shifted by the group key.
//!   Members evaluate the polynomial at their own point and read off the
//!   key; everyone else sees an unrelated field element.
//! - [`Backend::Lock`]: a Chinese-remainder "lock" integer. Each member
//!   holds a private prime modulus; the lock's residue at that modulus is
//!   the group key masked by a per-member pad.
//!
//! Public information is linear in the member count for both backends.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigUint;
use thiserror::Error;

use crate::drbg::Drbg;
use crate::field::Fq;
use crate::hash::{self, TAG_FIELD_POINT, TAG_PAYLOAD_KEY};
use crate::numtheory;

mod acp;
mod lock;

pub use acp::eval_polynomial;
pub use lock::{lock_pad, mask_key, unmask_residue};

/// Opaque member identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MeterId(pub String);

impl fmt::Display for MeterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for MeterId {
    fn from(s: &str) -> Self {
        MeterId(s.to_string())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BgkmError {
    #[error("field modulus is not prime")]
    NonPrimeField,
    #[error("invalid security parameters: {0}")]
    BadParams(&'static str),
    #[error("member {0} is already enrolled")]
    DuplicateMember(MeterId),
    #[error("secret material collides with an enrolled member")]
    DuplicateSecret,
    #[error("could not draw a distinct modulus after {0} attempts")]
    ModulusCollision(u32),
    #[error("could not find collision-free evaluation points after {0} attempts")]
    RetriesExhausted(u32),
    #[error("unknown member {0}")]
    UnknownMember(MeterId),
    #[error("member set is empty")]
    EmptyMemberSet,
    #[error("secret carries no lock modulus; cannot derive")]
    MissingModulus,
    #[error("malformed public info: {0}")]
    Codec(&'static str),
}

/// System-wide security parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecurityParams {
    /// Prime field modulus for the polynomial backend.
    pub field_prime: u128,
    /// Width of the group key in bytes (at most 16).
    pub key_bytes: usize,
    /// Bit width of per-member lock moduli.
    pub modulus_bits: u32,
    /// Retry budget for modulus draws and evaluation-point collisions.
    pub max_keygen_retries: u32,
}

impl Default for SecurityParams {
    fn default() -> Self {
        SecurityParams {
            field_prime: (1u128 << 127) - 1,
            key_bytes: 16,
            modulus_bits: 136,
            max_keygen_retries: 16,
        }
    }
}

impl SecurityParams {
    /// Check all parameter invariants, including a 64-round primality test
    /// on the field modulus.
    pub fn validate(&self) -> Result<(), BgkmError> {
        if self.key_bytes == 0 || self.key_bytes > 16 {
            return Err(BgkmError::BadParams("key_bytes must be in 1..=16"));
        }
        if (self.modulus_bits as usize) <= 8 * self.key_bytes {
            return Err(BgkmError::BadParams("modulus_bits must exceed 8*key_bytes"));
        }
        // Group keys are encoded in key_bytes bytes, so field elements must fit.
        let field_bits = 128 - self.field_prime.leading_zeros();
        if field_bits as usize > 8 * self.key_bytes {
            return Err(BgkmError::BadParams("field_prime wider than key encoding"));
        }
        if self.max_keygen_retries == 0 {
            return Err(BgkmError::BadParams("max_keygen_retries must be positive"));
        }
        if !numtheory::is_probable_prime(&BigUint::from(self.field_prime), 64) {
            return Err(BgkmError::NonPrimeField);
        }
        Ok(())
    }
}

/// Which concrete scheme hides the group key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Acp,
    Lock,
}

impl Backend {
    pub fn tag(self) -> u8 {
        match self {
            Backend::Acp => 0x01,
            Backend::Lock => 0x02,
        }
    }

    pub fn from_tag(t: u8) -> Option<Backend> {
        match t {
            0x01 => Some(Backend::Acp),
            0x02 => Some(Backend::Lock),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Backend::Acp => "acp",
            Backend::Lock => "lock",
        }
    }
}

/// Per-member secret material held by the controller and the member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeterSecret {
    pub meter_id: MeterId,
    pub s: [u8; 32],
    /// Private prime modulus; present only under the lock backend.
    pub crt_modulus: Option<BigUint>,
}

impl MeterSecret {
    /// Canonical serialization, used by re-key locality checks.
    pub fn to_bytes(&self) -> Vec<u8> {
        let id = self.meter_id.0.as_bytes();
        let mut out = Vec::with_capacity(2 + id.len() + 33 + 19);
        out.extend_from_slice(&(id.len() as u16).to_be_bytes());
        out.extend_from_slice(id);
        out.extend_from_slice(&self.s);
        match &self.crt_modulus {
            None => out.push(0),
            Some(m) => {
                out.push(1);
                let mb = m.to_bytes_be();
                out.extend_from_slice(&(mb.len() as u16).to_be_bytes());
                out.extend_from_slice(&mb);
            }
        }
        out
    }
}

/// A group key together with its epoch sequence number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupKey {
    pub k: Vec<u8>,
    pub seq: u32,
}

/// The broadcast structure that hides the group key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicInfo {
    pub backend: Backend,
    pub z: [u8; 16],
    pub seq: u32,
    pub member_count: u32,
    pub body: PubInfoBody,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PubInfoBody {
    /// Monic polynomial coefficients, constant term first.
    Acp(Vec<u128>),
    /// Chinese-remainder lock value.
    Lock(BigUint),
}

pub const PUBINFO_VERSION: u8 = 1;
/// Fixed size of everything before the backend body.
pub const PUBINFO_HEADER_BYTES: usize = 1 + 1 + 4 + 16 + 4;

impl PublicInfo {
    /// Wire encoding: `version(1) || backend(1) || seq(4) || z(16) || n(4) || body`,
    /// big-endian throughout. The polynomial body is `(n+1)` 16-byte field
    /// elements, constant term first; the lock body is `len(4)` followed by
    /// the lock as a minimal big-endian integer.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(PUBINFO_HEADER_BYTES + 64);
        out.push(PUBINFO_VERSION);
        out.push(self.backend.tag());
        out.extend_from_slice(&self.seq.to_be_bytes());
        out.extend_from_slice(&self.z);
        out.extend_from_slice(&self.member_count.to_be_bytes());
        match &self.body {
            PubInfoBody::Acp(coeffs) => {
                for c in coeffs {
                    out.extend_from_slice(&c.to_be_bytes());
                }
            }
            PubInfoBody::Lock(lock) => {
                let lb = lock.to_bytes_be();
                out.extend_from_slice(&(lb.len() as u32).to_be_bytes());
                out.extend_from_slice(&lb);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<PublicInfo, BgkmError> {
        if bytes.len() < PUBINFO_HEADER_BYTES {
            return Err(BgkmError::Codec("truncated header"));
        }
        if bytes[0] != PUBINFO_VERSION {
            return Err(BgkmError::Codec("unsupported version"));
        }
        let backend = Backend::from_tag(bytes[1]).ok_or(BgkmError::Codec("unknown backend tag"))?;
        let seq = u32::from_be_bytes(bytes[2..6].try_into().unwrap());
        let mut z = [0u8; 16];
        z.copy_from_slice(&bytes[6..22]);
        let member_count = u32::from_be_bytes(bytes[22..26].try_into().unwrap());
        if member_count > (1 << 22) {
            return Err(BgkmError::Codec("implausible member count"));
        }
        let body = &bytes[PUBINFO_HEADER_BYTES..];
        let parsed = match backend {
            Backend::Acp => {
                let want = (member_count as usize + 1) * 16;
                if body.len() != want {
                    return Err(BgkmError::Codec("coefficient body length mismatch"));
                }
                let coeffs = body
                    .chunks_exact(16)
                    .map(|c| u128::from_be_bytes(c.try_into().unwrap()))
                    .collect();
                PubInfoBody::Acp(coeffs)
            }
            Backend::Lock => {
                if body.len() < 4 {
                    return Err(BgkmError::Codec("truncated lock length"));
                }
                let len = u32::from_be_bytes(body[..4].try_into().unwrap()) as usize;
                if body.len() != 4 + len {
                    return Err(BgkmError::Codec("lock body length mismatch"));
                }
                PubInfoBody::Lock(BigUint::from_bytes_be(&body[4..]))
            }
        };
        Ok(PublicInfo {
            backend,
            z,
            seq,
            member_count,
            body: parsed,
        })
    }
}

/// Controller-side state: parameters, the secret table, and the current
/// key epoch. All randomness comes from the generator seeded at setup.
#[derive(Debug, Clone)]
pub struct GroupState {
    pub params: SecurityParams,
    pub backend: Backend,
    field: Fq,
    secrets: BTreeMap<MeterId, MeterSecret>,
    seq: u32,
    current: Option<(GroupKey, PublicInfo)>,
    drbg: Drbg,
}

impl GroupState {
    /// Initialize an empty group. Validates all parameter invariants.
    pub fn setup(
        params: SecurityParams,
        backend: Backend,
        drbg_seed: [u8; 32],
    ) -> Result<GroupState, BgkmError> {
        params.validate()?;
        Ok(GroupState {
            field: Fq::new(params.field_prime),
            params,
            backend,
            secrets: BTreeMap::new(),
            seq: 0,
            current: None,
            drbg: Drbg::new(drbg_seed),
        })
    }

    pub fn seq(&self) -> u32 {
        self.seq
    }

    pub fn member_count(&self) -> usize {
        self.secrets.len()
    }

    pub fn is_enrolled(&self, id: &MeterId) -> bool {
        self.secrets.contains_key(id)
    }

    pub fn secret(&self, id: &MeterId) -> Option<&MeterSecret> {
        self.secrets.get(id)
    }

    pub fn member_ids(&self) -> impl Iterator<Item = &MeterId> {
        self.secrets.keys()
    }

    pub fn current(&self) -> Option<&(GroupKey, PublicInfo)> {
        self.current.as_ref()
    }

    /// Assign a fresh uniformly random secret to a new member.
    pub fn sec_gen(&mut self, id: &MeterId) -> Result<&MeterSecret, BgkmError> {
        if self.secrets.contains_key(id) {
            return Err(BgkmError::DuplicateMember(id.clone()));
        }
        let s = self.drbg.gen::<32>();
        self.register_secret(id, s)
    }

    /// Enroll a member whose 32-byte secret was produced elsewhere (for
    /// example by a device-resident generator) and delivered over a trusted
    /// installation channel. Under the lock backend a private modulus is
    /// drawn here as well.
    pub fn register_secret(
        &mut self,
        id: &MeterId,
        s: [u8; 32],
    ) -> Result<&MeterSecret, BgkmError> {
        if self.secrets.contains_key(id) {
            return Err(BgkmError::DuplicateMember(id.clone()));
        }
        if self.secrets.values().any(|sec| sec.s == s) {
            return Err(BgkmError::DuplicateSecret);
        }
        let crt_modulus = match self.backend {
            Backend::Acp => None,
            Backend::Lock => Some(self.draw_distinct_modulus()?),
        };
        let secret = MeterSecret {
            meter_id: id.clone(),
            s,
            crt_modulus,
        };
        Ok(self.secrets.entry(id.clone()).or_insert(secret))
    }

    fn draw_distinct_modulus(&mut self) -> Result<BigUint, BgkmError> {
        for _ in 0..=self.params.max_keygen_retries {
            let m = numtheory::gen_prime(&mut self.drbg, self.params.modulus_bits);
            let taken = self
                .secrets
                .values()
                .any(|sec| sec.crt_modulus.as_ref() == Some(&m));
            if !taken {
                return Ok(m);
            }
        }
        Err(BgkmError::ModulusCollision(self.params.max_keygen_retries))
    }

    /// Remove a member's entry from the secret table. No other member's
    /// state is touched; callers wanting forward secrecy must re-key before
    /// the next broadcast.
    pub fn remove_member(&mut self, id: &MeterId) -> Result<MeterSecret, BgkmError> {
        self.secrets
            .remove(id)
            .ok_or_else(|| BgkmError::UnknownMember(id.clone()))
    }

    /// Generate a fresh group key for `members` and the public information
    /// hiding it. Bumps the key sequence number.
    pub fn key_gen(
        &mut self,
        members: &BTreeSet<MeterId>,
    ) -> Result<(GroupKey, PublicInfo), BgkmError> {
        if members.is_empty() {
            return Err(BgkmError::EmptyMemberSet);
        }
        let mut selected = Vec::with_capacity(members.len());
        for id in members {
            let sec = self
                .secrets
                .get(id)
                .ok_or_else(|| BgkmError::UnknownMember(id.clone()))?;
            selected.push(sec);
        }
        self.seq += 1;
        let result = match self.backend {
            Backend::Acp => acp::key_gen(
                &self.field,
                &mut self.drbg,
                &selected,
                self.seq,
                &self.params,
            ),
            Backend::Lock => lock::key_gen(&mut self.drbg, &selected, self.seq, &self.params),
        }?;
        self.current = Some(result.clone());
        Ok(result)
    }

    /// Re-key after a membership change: fresh key, fresh nonce, new public
    /// information over the updated set. Retained members' secrets are
    /// byte-for-byte unchanged.
    pub fn re_key(
        &mut self,
        members: &BTreeSet<MeterId>,
    ) -> Result<(GroupKey, PublicInfo), BgkmError> {
        self.key_gen(members)
    }
}

/// Map secret material and a nonce to a field element: the big-endian value
/// of `H(0x01 || s || z)` reduced mod `q`. The reduction bias is below
/// 2^-128 for any modulus under 2^128.
pub fn hash_to_field(s: &[u8], z: &[u8; 16], q: u128) -> u128 {
    use num_traits::ToPrimitive;
    let d = hash::digest(&[&[TAG_FIELD_POINT], s, z]);
    (BigUint::from_bytes_be(&d) % BigUint::from(q))
        .to_u128()
        .expect("residue fits in 128 bits")
}

/// Member-side key derivation from public information.
///
/// Any holder of a secret can run this; only secrets that participated in
/// the generating member set yield the true group key. A wrong secret
/// produces a well-formed but different key, which downstream envelope
/// authentication rejects.
pub fn key_der(
    secret: &MeterSecret,
    pub_info: &PublicInfo,
    params: &SecurityParams,
) -> Result<GroupKey, BgkmError> {
    match &pub_info.body {
        PubInfoBody::Acp(coeffs) => Ok(acp::key_der(
            secret,
            &pub_info.z,
            coeffs,
            params,
            pub_info.seq,
        )),
        PubInfoBody::Lock(lock_value) => lock::key_der(
            secret,
            &pub_info.z,
            lock_value,
            params.key_bytes,
            pub_info.seq,
        ),
    }
}

/// Bridge a group key to a 16-byte envelope key:
/// first 16 bytes of `H(0x02 || k)` with `k` left-padded to 16 bytes.
pub fn payload_key(key: &GroupKey) -> [u8; 16] {
    let mut padded = [0u8; 16];
    let n = key.k.len().min(16);
    padded[16 - n..].copy_from_slice(&key.k[key.k.len() - n..]);
    hash::digest16(&[&[TAG_PAYLOAD_KEY], &padded])
}

/// Encode a field element as a `key_bytes`-wide big-endian string.
pub(crate) fn encode_key(value: u128, key_bytes: usize) -> Vec<u8> {
    let be = value.to_be_bytes();
    be[16 - key_bytes..].to_vec()
}

#[cfg(test)]
mod tests;
