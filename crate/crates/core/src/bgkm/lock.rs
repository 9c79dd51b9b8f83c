//! Chinese-remainder lock backend.
//!
//! Every member holds a private prime modulus. Key generation masks the
//! group key with a per-member pad, treats each masked key as a residue,
//! and publishes the unique integer congruent to every residue modulo the
//! product of the member moduli. A member reduces the lock by its modulus
//! and strips its pad; an entity without a modulus cannot derive at all.

use num_bigint::BigUint;

use super::{Backend, BgkmError, GroupKey, MeterSecret, PubInfoBody, PublicInfo, SecurityParams};
use crate::drbg::Drbg;
use crate::hash::{self, TAG_LOCK_PAD};
use crate::numtheory;

pub(super) fn key_gen(
    drbg: &mut Drbg,
    members: &[&MeterSecret],
    seq: u32,
    params: &SecurityParams,
) -> Result<(GroupKey, PublicInfo), BgkmError> {
    let k = drbg.vec(params.key_bytes);
    let z = drbg.gen::<16>();

    let mut residues = Vec::with_capacity(members.len());
    let mut moduli = Vec::with_capacity(members.len());
    for m in members {
        let modulus = m.crt_modulus.clone().ok_or(BgkmError::MissingModulus)?;
        let pad = lock_pad(&m.s, &z, params.key_bytes);
        // modulus_bits > 8*key_bytes guarantees the residue is in range.
        residues.push(BigUint::from_bytes_be(&mask_key(&k, &pad)));
        moduli.push(modulus);
    }
    let lock = numtheory::crt_combine(&residues, &moduli).ok_or(BgkmError::EmptyMemberSet)?;

    let key = GroupKey { k, seq };
    let info = PublicInfo {
        backend: Backend::Lock,
        z,
        seq,
        member_count: members.len() as u32,
        body: PubInfoBody::Lock(lock),
    };
    Ok((key, info))
}

pub(super) fn key_der(
    secret: &MeterSecret,
    z: &[u8; 16],
    lock: &BigUint,
    key_bytes: usize,
    seq: u32,
) -> Result<GroupKey, BgkmError> {
    let modulus = secret
        .crt_modulus
        .as_ref()
        .ok_or(BgkmError::MissingModulus)?;
    let residue = lock % modulus;
    let pad = lock_pad(&secret.s, z, key_bytes);
    Ok(GroupKey {
        k: mask_key(&unmask_residue(&residue, key_bytes), &pad),
        seq,
    })
}

/// Per-member pad: first `key_bytes` bytes of `H(0x0b || s || z)`.
pub fn lock_pad(s: &[u8], z: &[u8; 16], key_bytes: usize) -> Vec<u8> {
    hash::digest(&[&[TAG_LOCK_PAD], s, z])[..key_bytes].to_vec()
}

/// XOR two equal-length byte strings (mask or unmask a key with a pad).
pub fn mask_key(k: &[u8], pad: &[u8]) -> Vec<u8> {
    debug_assert_eq!(k.len(), pad.len());
    k.iter().zip(pad).map(|(a, b)| a ^ b).collect()
}

/// Render a residue as exactly `key_bytes` big-endian bytes, keeping the
/// low-order bytes if an out-of-range value (a non-member's residue) is
/// wider than the key.
pub fn unmask_residue(residue: &BigUint, key_bytes: usize) -> Vec<u8> {
    let raw = residue.to_bytes_be();
    let mut out = vec![0u8; key_bytes];
    if raw.len() >= key_bytes {
        out.copy_from_slice(&raw[raw.len() - key_bytes..]);
    } else {
        out[key_bytes - raw.len()..].copy_from_slice(&raw);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    #[test]
    fn toy_lock_residues() {
        // Residues {5, 12} under moduli {11, 13} combine to 38.
        let lock = numtheory::crt_combine(&[big(5), big(12)], &[big(11), big(13)]).unwrap();
        assert_eq!(lock, big(38));
        assert_eq!(&lock % big(11), big(5));
        assert_eq!(&lock % big(13), big(12));
    }

    #[test]
    fn toy_members_recover_masked_key() {
        // k = 6 with pads {3, 10} gives residues {5, 12}; both members
        // recover 6 from the lock value 38.
        let k = vec![6u8];
        let pads = [vec![3u8], vec![10u8]];
        let residues: Vec<BigUint> = pads
            .iter()
            .map(|p| BigUint::from_bytes_be(&mask_key(&k, p)))
            .collect();
        assert_eq!(residues, vec![big(5), big(12)]);
        let lock = numtheory::crt_combine(&residues, &[big(11), big(13)]).unwrap();
        assert_eq!(lock, big(38));

        for (pad, modulus) in pads.iter().zip([big(11), big(13)]) {
            let residue = &lock % modulus;
            let recovered = mask_key(&unmask_residue(&residue, 1), pad);
            assert_eq!(recovered, k);
        }
    }

    #[test]
    fn wrong_pad_recovers_wrong_key() {
        let lock = big(38);
        let residue = &lock % big(11);
        let recovered = mask_key(&unmask_residue(&residue, 1), &[9u8]);
        assert_ne!(recovered, vec![6u8]);
    }

    #[test]
    fn unmask_pads_and_truncates() {
        assert_eq!(unmask_residue(&big(5), 2), vec![0, 5]);
        assert_eq!(unmask_residue(&big(0x01_02_03), 2), vec![2, 3]);
    }
}
