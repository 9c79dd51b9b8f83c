use std::collections::BTreeSet;

use num_integer::Integer;
use num_traits::One;

use super::*;
use crate::field::Fq;

const M127: u128 = (1u128 << 127) - 1;

fn ids(n: usize) -> BTreeSet<MeterId> {
    (0..n).map(|i| MeterId(format!("m{i:04}"))).collect()
}

fn toy_acp_params() -> SecurityParams {
    SecurityParams {
        field_prime: 97,
        ..SecurityParams::default()
    }
}

/// Lock profile small enough for brute-force scanning: 1-byte keys,
/// 10-bit member moduli.
fn toy_lock_params() -> SecurityParams {
    SecurityParams {
        field_prime: 97,
        key_bytes: 1,
        modulus_bits: 10,
        max_keygen_retries: 16,
    }
}

fn state(params: SecurityParams, backend: Backend, seed: u64) -> GroupState {
    let mut seed_bytes = [0u8; 32];
    seed_bytes[..8].copy_from_slice(&seed.to_be_bytes());
    GroupState::setup(params, backend, seed_bytes).unwrap()
}

fn enroll(state: &mut GroupState, members: &BTreeSet<MeterId>) {
    for id in members {
        state.sec_gen(id).unwrap();
    }
}

#[test]
fn setup_defaults() {
    let st = state(SecurityParams::default(), Backend::Acp, 0);
    assert_eq!(st.member_count(), 0);
    assert_eq!(st.seq(), 0);
    assert!(st.current().is_none());
}

#[test]
fn setup_accepts_toy_prime_and_rejects_composite() {
    assert!(GroupState::setup(toy_acp_params(), Backend::Acp, [0u8; 32]).is_ok());
    let bad = SecurityParams {
        field_prime: 91, // 7 * 13
        ..SecurityParams::default()
    };
    assert_eq!(
        GroupState::setup(bad, Backend::Acp, [0u8; 32]).unwrap_err(),
        BgkmError::NonPrimeField
    );
}

#[test]
fn sec_gen_uniqueness_and_duplicate_rejection() {
    let mut st = state(SecurityParams::default(), Backend::Acp, 1);
    let a = st.sec_gen(&"a".into()).unwrap().s;
    let b = st.sec_gen(&"b".into()).unwrap().s;
    assert_ne!(a, b);
    assert_eq!(
        st.sec_gen(&"a".into()).unwrap_err(),
        BgkmError::DuplicateMember("a".into())
    );
}

#[test]
fn lock_moduli_are_distinct_wide_primes() {
    let mut st = state(SecurityParams::default(), Backend::Lock, 2);
    let members = ids(8);
    enroll(&mut st, &members);
    let moduli: Vec<_> = members
        .iter()
        .map(|id| st.secret(id).unwrap().crt_modulus.clone().unwrap())
        .collect();
    let floor = BigUint::one() << 128;
    for m in &moduli {
        assert!(*m > floor, "modulus must exceed 2^128");
    }
    // Brute-force pairwise coprimality check.
    for i in 0..moduli.len() {
        for j in i + 1..moduli.len() {
            assert_ne!(moduli[i], moduli[j]);
            assert!(moduli[i].gcd(&moduli[j]).is_one());
        }
    }
}

#[test]
fn modulus_space_exhaustion_reports_collision() {
    // 9-bit moduli leave only 43 primes; enrolling 44 members must fail
    // with a collision, and never silently reuse a modulus.
    let params = SecurityParams {
        field_prime: 97,
        key_bytes: 1,
        modulus_bits: 9,
        max_keygen_retries: 16,
    };
    let mut st = state(params, Backend::Lock, 3);
    let mut failed = None;
    for i in 0..60 {
        match st.sec_gen(&MeterId(format!("m{i}"))) {
            Ok(_) => continue,
            Err(e) => {
                failed = Some((i, e));
                break;
            }
        }
    }
    let (at, err) = failed.expect("enrollment must eventually exhaust the modulus space");
    assert!(at <= 44);
    assert_eq!(err, BgkmError::ModulusCollision(16));
}

#[test]
fn hash_to_field_is_deterministic_and_in_range() {
    let s = [5u8; 32];
    let z = [9u8; 16];
    let a = hash_to_field(&s, &z, M127);
    let b = hash_to_field(&s, &z, M127);
    assert_eq!(a, b);
    assert!(a < M127);
    for trial in 0u32..64 {
        let mut z2 = z;
        z2[..4].copy_from_slice(&trial.to_be_bytes());
        assert!(hash_to_field(&s, &z2, 97) < 97);
    }
}

#[test]
fn hash_to_field_nonce_separation() {
    // 10^4 distinct nonces on one secret: all evaluation points distinct.
    let s = [7u8; 32];
    let mut seen = std::collections::HashSet::new();
    for i in 0u32..10_000 {
        let mut z = [0u8; 16];
        z[..4].copy_from_slice(&i.to_be_bytes());
        assert!(seen.insert(hash_to_field(&s, &z, M127)), "collision at {i}");
    }
}

#[test]
fn acp_key_gen_roots_recover_key_in_toy_field() {
    let mut st = state(toy_acp_params(), Backend::Acp, 4);
    let members = ids(3);
    enroll(&mut st, &members);
    let (key, info) = st.key_gen(&members).unwrap();
    assert_eq!(info.member_count, 3);
    let PubInfoBody::Acp(coeffs) = &info.body else {
        panic!("wrong body")
    };
    assert_eq!(coeffs.len(), 4, "n members publish n+1 coefficients");
    assert_eq!(*coeffs.last().unwrap(), 1, "published polynomial is monic");

    // Pointwise sweep of the whole field against an independent product
    // oracle; also pins down that exactly the member points yield the key.
    let f = Fq::new(97);
    let k_value = u128::from_be_bytes(key.k[..].try_into().unwrap());
    let roots: BTreeSet<u128> = members
        .iter()
        .map(|id| hash_to_field(&st.secret(id).unwrap().s, &info.z, 97))
        .collect();
    assert_eq!(roots.len(), 3);
    for x in 0u128..97 {
        let mut product = 1u128;
        for &r in &roots {
            product = f.mul(product, f.sub(x, r));
        }
        let expected = f.add(product, k_value);
        assert_eq!(eval_polynomial(coeffs, x, &f), expected);
        if roots.contains(&x) {
            assert_eq!(expected, k_value);
        } else {
            assert_ne!(expected, k_value, "non-member point must not derive");
        }
    }
}

#[test]
fn acp_key_der_matches_key_gen_for_every_member() {
    let mut st = state(SecurityParams::default(), Backend::Acp, 5);
    let members = ids(17);
    enroll(&mut st, &members);
    let (key, info) = st.key_gen(&members).unwrap();
    for id in &members {
        let derived = key_der(st.secret(id).unwrap(), &info, &st.params).unwrap();
        assert_eq!(derived, key);
    }
}

#[test]
fn acp_outsiders_never_derive_at_production_size() {
    let mut st = state(SecurityParams::default(), Backend::Acp, 6);
    let members = ids(4);
    enroll(&mut st, &members);
    let (key, info) = st.key_gen(&members).unwrap();
    let mut drbg = Drbg::from_u64(999);
    for _ in 0..10_000 {
        let outsider = MeterSecret {
            meter_id: "outsider".into(),
            s: drbg.gen::<32>(),
            crt_modulus: None,
        };
        let derived = key_der(&outsider, &info, &st.params).unwrap();
        assert_ne!(derived.k, key.k);
    }
}

#[test]
fn lock_key_der_matches_key_gen_and_scan_oracle() {
    let mut st = state(toy_lock_params(), Backend::Lock, 7);
    let members = ids(2);
    enroll(&mut st, &members);
    let (key, info) = st.key_gen(&members).unwrap();
    let PubInfoBody::Lock(lock_value) = &info.body else {
        panic!("wrong body")
    };

    // Brute-force scan oracle over the full residue range (product < 10^6).
    let moduli: Vec<u64> = members
        .iter()
        .map(|id| {
            u64::try_from(st.secret(id).unwrap().crt_modulus.clone().unwrap()).unwrap()
        })
        .collect();
    let residues: Vec<u64> = members
        .iter()
        .map(|id| {
            let pad = lock_pad(&st.secret(id).unwrap().s, &info.z, 1);
            (key.k[0] ^ pad[0]) as u64
        })
        .collect();
    let product: u64 = moduli.iter().product();
    let mut scanned = None;
    for cand in 0..product {
        if moduli
            .iter()
            .zip(&residues)
            .all(|(m, r)| cand % m == *r)
        {
            scanned = Some(cand);
            break;
        }
    }
    assert_eq!(BigUint::from(scanned.unwrap()), *lock_value);

    for id in &members {
        let derived = key_der(st.secret(id).unwrap(), &info, &st.params).unwrap();
        assert_eq!(derived, key);
    }
}

#[test]
fn lock_wrong_secret_right_modulus_derives_wrong_key() {
    let mut st = state(toy_lock_params(), Backend::Lock, 8);
    let members = ids(2);
    enroll(&mut st, &members);
    let (key, info) = st.key_gen(&members).unwrap();
    let genuine = st.secret(members.iter().next().unwrap()).unwrap().clone();
    // Exhaustive over all 256 wrong one-byte pads via wrong secrets.
    let mut drbg = Drbg::from_u64(1234);
    let mut mismatches = 0;
    for _ in 0..64 {
        let imposter = MeterSecret {
            s: drbg.gen::<32>(),
            ..genuine.clone()
        };
        let derived = key_der(&imposter, &info, &st.params).unwrap();
        if derived.k != key.k {
            mismatches += 1;
        }
    }
    // A one-byte pad collides with probability 1/256 per draw.
    assert!(mismatches >= 62);
}

#[test]
fn lock_derivation_requires_a_modulus() {
    let mut st = state(SecurityParams::default(), Backend::Lock, 9);
    let members = ids(2);
    enroll(&mut st, &members);
    let (_, info) = st.key_gen(&members).unwrap();
    let collector = MeterSecret {
        meter_id: "collector".into(),
        s: [0u8; 32],
        crt_modulus: None,
    };
    assert_eq!(
        key_der(&collector, &info, &st.params).unwrap_err(),
        BgkmError::MissingModulus
    );
}

#[test]
fn key_gen_requires_enrolled_nonempty_set() {
    let mut st = state(SecurityParams::default(), Backend::Acp, 10);
    assert_eq!(
        st.key_gen(&BTreeSet::new()).unwrap_err(),
        BgkmError::EmptyMemberSet
    );
    let ghost: BTreeSet<MeterId> = [MeterId::from("ghost")].into();
    assert_eq!(
        st.key_gen(&ghost).unwrap_err(),
        BgkmError::UnknownMember("ghost".into())
    );
}

#[test]
fn seq_strictly_increases() {
    let mut st = state(SecurityParams::default(), Backend::Acp, 11);
    let members = ids(2);
    enroll(&mut st, &members);
    let (k1, p1) = st.key_gen(&members).unwrap();
    let (k2, p2) = st.re_key(&members).unwrap();
    assert_eq!(k1.seq, 1);
    assert_eq!(k2.seq, 2);
    assert_eq!(p1.seq, 1);
    assert_eq!(p2.seq, 2);
}

#[test]
fn re_key_leaves_retained_secrets_untouched_and_excludes_revoked() {
    let mut st = state(toy_acp_params(), Backend::Acp, 12);
    let members = ids(4);
    enroll(&mut st, &members);
    st.key_gen(&members).unwrap();

    let mut retained = members.clone();
    let revoked = MeterId::from("m0000");
    retained.remove(&revoked);
    let revoked_secret = st.secret(&revoked).unwrap().clone();
    let before: Vec<Vec<u8>> = retained
        .iter()
        .map(|id| st.secret(id).unwrap().to_bytes())
        .collect();

    st.remove_member(&revoked).unwrap();
    let (key, info) = st.re_key(&retained).unwrap();

    let after: Vec<Vec<u8>> = retained
        .iter()
        .map(|id| st.secret(id).unwrap().to_bytes())
        .collect();
    assert_eq!(before, after, "retained secrets must be bitwise unchanged");

    let PubInfoBody::Acp(coeffs) = &info.body else {
        panic!("wrong body")
    };
    assert_eq!(coeffs.len(), 4, "three retained members publish 4 coefficients");
    let stale = key_der(&revoked_secret, &info, &st.params).unwrap();
    assert_ne!(stale.k, key.k, "revoked secret must not evaluate to the new key");

    for id in &retained {
        assert_eq!(key_der(st.secret(id).unwrap(), &info, &st.params).unwrap(), key);
    }
}

#[test]
fn re_key_same_set_draws_fresh_key_and_nonce() {
    let mut st = state(SecurityParams::default(), Backend::Acp, 13);
    let members = ids(3);
    enroll(&mut st, &members);
    let (k1, p1) = st.key_gen(&members).unwrap();
    let (k2, p2) = st.re_key(&members).unwrap();
    assert_ne!(k1.k, k2.k);
    assert_ne!(p1.z, p2.z);
}

#[test]
fn adding_a_member_with_register_secret_grows_table_by_one() {
    let mut st = state(SecurityParams::default(), Backend::Lock, 14);
    let members = ids(3);
    enroll(&mut st, &members);
    let before: Vec<Vec<u8>> = members
        .iter()
        .map(|id| st.secret(id).unwrap().to_bytes())
        .collect();
    st.register_secret(&"joiner".into(), [0xab; 32]).unwrap();
    assert_eq!(st.member_count(), 4);
    let after: Vec<Vec<u8>> = members
        .iter()
        .map(|id| st.secret(id).unwrap().to_bytes())
        .collect();
    assert_eq!(before, after);
}

#[test]
fn payload_key_definition_and_separation() {
    let key = GroupKey {
        k: vec![0u8; 16],
        seq: 1,
    };
    // Independent recomputation from the definition.
    let expected = hash::digest(&[&[0x02u8], &[0u8; 16]]);
    assert_eq!(payload_key(&key), expected[..16]);

    let mut bumped = key.clone();
    *bumped.k.last_mut().unwrap() = 1;
    assert_ne!(payload_key(&key), payload_key(&bumped));

    // Backend-independent: only the key bytes matter.
    let lock_flavored = GroupKey {
        k: key.k.clone(),
        seq: 9,
    };
    assert_eq!(payload_key(&key), payload_key(&lock_flavored));

    // Short keys are left-padded to 16 bytes before hashing.
    let short = GroupKey { k: vec![0], seq: 0 };
    assert_eq!(payload_key(&short), payload_key(&key));
}

#[test]
fn pubinfo_wire_roundtrip_and_layout() {
    let mut st = state(SecurityParams::default(), Backend::Acp, 15);
    let members = ids(8);
    enroll(&mut st, &members);
    let (_, info) = st.key_gen(&members).unwrap();
    let bytes = info.to_bytes();
    assert_eq!(bytes.len(), PUBINFO_HEADER_BYTES + 16 * 9);
    assert_eq!(bytes[0], PUBINFO_VERSION);
    assert_eq!(bytes[1], 0x01);
    assert_eq!(PublicInfo::from_bytes(&bytes).unwrap(), info);

    let mut lock_st = state(SecurityParams::default(), Backend::Lock, 15);
    enroll(&mut lock_st, &members);
    let (_, lock_info) = lock_st.key_gen(&members).unwrap();
    let lock_bytes = lock_info.to_bytes();
    assert_eq!(lock_bytes[1], 0x02);
    assert_eq!(PublicInfo::from_bytes(&lock_bytes).unwrap(), lock_info);
}

#[test]
fn pubinfo_rejects_malformed_input() {
    assert!(PublicInfo::from_bytes(&[]).is_err());
    let mut st = state(SecurityParams::default(), Backend::Acp, 16);
    let members = ids(2);
    enroll(&mut st, &members);
    let (_, info) = st.key_gen(&members).unwrap();
    let mut bytes = info.to_bytes();
    bytes[0] = 9;
    assert!(PublicInfo::from_bytes(&bytes).is_err());
    let mut bytes = info.to_bytes();
    bytes[1] = 0x7f;
    assert!(PublicInfo::from_bytes(&bytes).is_err());
    let mut bytes = info.to_bytes();
    bytes.truncate(bytes.len() - 1);
    assert!(PublicInfo::from_bytes(&bytes).is_err());
}

#[test]
fn pubinfo_size_is_linear_in_member_count() {
    for (backend, seed) in [(Backend::Acp, 17u64), (Backend::Lock, 18)] {
        for n in [8usize, 64, 512] {
            let mut st = state(SecurityParams::default(), backend, seed);
            let members = ids(n);
            enroll(&mut st, &members);
            let (_, info) = st.key_gen(&members).unwrap();
            let total = info.to_bytes().len();
            match backend {
                Backend::Acp => {
                    assert_eq!(total, PUBINFO_HEADER_BYTES + 16 * (n + 1));
                }
                Backend::Lock => {
                    let body = total - PUBINFO_HEADER_BYTES - 4;
                    assert!(
                        body >= 16 * n && body <= 18 * n,
                        "lock body {body} outside linear window for n={n}"
                    );
                }
            }
        }
    }
}

#[test]
fn equal_seeds_give_bitwise_identical_public_info() {
    let run = || {
        let mut st = state(SecurityParams::default(), Backend::Acp, 19);
        let members = ids(5);
        enroll(&mut st, &members);
        let mut out = Vec::new();
        for _ in 0..3 {
            let (_, info) = st.re_key(&members).unwrap();
            out.push(info.to_bytes());
        }
        out
    };
    assert_eq!(run(), run());
}
