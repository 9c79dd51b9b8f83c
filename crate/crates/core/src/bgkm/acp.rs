//! Polynomial backend: the group key hides in the constant offset of a
//! monic polynomial whose roots are the members' evaluation points.
//!
//! Key generation publishes `P(x) = prod(x - x_i) + k` over `F_q`, where
//! `x_i = hash_to_field(s_i, z)`. A member evaluates `P` at its own point
//! and reads off `k`; any other point yields an unrelated element.

use super::{
    encode_key, hash_to_field, Backend, BgkmError, GroupKey, MeterSecret, PubInfoBody, PublicInfo,
    SecurityParams,
};
use crate::drbg::Drbg;
use crate::field::Fq;

pub(super) fn key_gen(
    field: &Fq,
    drbg: &mut Drbg,
    members: &[&MeterSecret],
    seq: u32,
    params: &SecurityParams,
) -> Result<(GroupKey, PublicInfo), BgkmError> {
    let q = field.modulus();
    let k = drbg.below_u128(q);

    // Fresh nonce; redrawn if two members land on the same point, which is
    // only a realistic event in toy-sized fields.
    let mut chosen = None;
    for _ in 0..params.max_keygen_retries {
        let z = drbg.gen::<16>();
        let mut points: Vec<u128> = members
            .iter()
            .map(|m| hash_to_field(&m.s, &z, q))
            .collect();
        let unsorted = points.clone();
        points.sort_unstable();
        if points.windows(2).all(|w| w[0] != w[1]) {
            chosen = Some((z, unsorted));
            break;
        }
    }
    let (z, points) =
        chosen.ok_or(BgkmError::RetriesExhausted(params.max_keygen_retries))?;

    let mut coeffs = expand_roots(&points, field);
    coeffs[0] = field.add(coeffs[0], k);

    let key = GroupKey {
        k: encode_key(k, params.key_bytes),
        seq,
    };
    let info = PublicInfo {
        backend: Backend::Acp,
        z,
        seq,
        member_count: members.len() as u32,
        body: PubInfoBody::Acp(coeffs),
    };
    Ok((key, info))
}

pub(super) fn key_der(
    secret: &MeterSecret,
    z: &[u8; 16],
    coeffs: &[u128],
    params: &SecurityParams,
    seq: u32,
) -> GroupKey {
    let x = hash_to_field(&secret.s, z, params.field_prime);
    let value = eval_polynomial(coeffs, x, &Fq::new(params.field_prime));
    GroupKey {
        k: encode_key(value, params.key_bytes),
        seq,
    }
}

/// Expand `prod(x - roots[i])` into monic coefficients, constant term
/// first. The returned vector has `roots.len() + 1` entries and the leading
/// coefficient is always 1.
pub(super) fn expand_roots(roots: &[u128], field: &Fq) -> Vec<u128> {
    let mut coeffs = Vec::with_capacity(roots.len() + 1);
    coeffs.push(1u128);
    for &r in roots {
        let neg_r = field.neg(r);
        coeffs.push(1);
        // Multiply in place by (x - r), highest degree first.
        for j in (0..coeffs.len() - 1).rev() {
            let shifted = if j > 0 { coeffs[j - 1] } else { 0 };
            coeffs[j] = field.add(shifted, field.mul(neg_r, coeffs[j]));
        }
    }
    coeffs
}

/// Horner evaluation of a polynomial given constant-term-first
/// coefficients: n multiplications and n additions for degree n.
/// Coefficients outside the field are reduced on use so untrusted wire
/// input cannot break evaluation.
pub fn eval_polynomial(coeffs: &[u128], x: u128, field: &Fq) -> u128 {
    let q = field.modulus();
    let norm = |c: u128| if c >= q { c % q } else { c };
    let mut acc = coeffs.last().map(|&c| norm(c)).unwrap_or(0);
    for &c in coeffs.iter().rev().skip(1) {
        acc = field.add(field.mul(acc, x), norm(c));
    }
    acc
}
