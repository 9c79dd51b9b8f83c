//! Domain-separated SHA-256 helpers shared by every subsystem.
//!
//! Every derivation in the workspace prefixes its hash input with a unique
//! tag byte so that no two uses of the hash can ever see colliding inputs.
//! The tag table below is the single source of truth; modules compose their
//! inputs through [`digest`] rather than hashing ad hoc.

use sha2::{Digest, Sha256};

/// Per-member evaluation point derivation (group key polynomials).
pub const TAG_FIELD_POINT: u8 = 0x01;
/// Group key to envelope payload key.
pub const TAG_PAYLOAD_KEY: u8 = 0x02;
/// Simulated PUF challenge-response mapping.
pub const TAG_PUF_RESPONSE: u8 = 0x03;
/// Per-meter uplink envelope key.
pub const TAG_UPLINK_KEY: u8 = 0x04;
/// Envelope keystream subkey.
pub const TAG_STREAM_KEY: u8 = 0x05;
/// Envelope MAC subkey.
pub const TAG_MAC_KEY: u8 = 0x06;
/// Deterministic random generator block function.
pub const TAG_DRBG_BLOCK: u8 = 0x07;
/// Subscriber signed response (link authentication).
pub const TAG_SRES: u8 = 0x08;
/// Link ciphering key.
pub const TAG_KC: u8 = 0x09;
/// Link-layer keystream blocks.
pub const TAG_LINK_STREAM: u8 = 0x0a;
/// Per-member pad for the CRT lock backend.
pub const TAG_LOCK_PAD: u8 = 0x0b;
/// Nonce-bound response for hardened device authentication.
pub const TAG_BOUND_RESPONSE: u8 = 0x0c;
/// Feedback-loop secret finalization.
pub const TAG_FEEDBACK_SECRET: u8 = 0x0d;
/// Event-log tamper-evidence chain.
pub const TAG_LOG_CHAIN: u8 = 0x0e;
/// Node identifier to 8-byte wire address.
pub const TAG_NODE_ADDR: u8 = 0x0f;
/// Witness derivation for the probabilistic primality test.
pub const TAG_MR_BASE: u8 = 0x10;

/// SHA-256 over the concatenation of `parts`.
pub fn digest(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

/// First 16 bytes of [`digest`].
pub fn digest16(parts: &[&[u8]]) -> [u8; 16] {
    let d = digest(parts);
    let mut out = [0u8; 16];
    out.copy_from_slice(&d[..16]);
    out
}

/// 8-byte wire address for a node identifier string.
pub fn node_addr(id: &str) -> [u8; 8] {
    let d = digest(&[&[TAG_NODE_ADDR], id.as_bytes()]);
    let mut out = [0u8; 8];
    out.copy_from_slice(&d[..8]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_matches_plain_sha256_of_concatenation() {
        let split = digest(&[b"abc", b"def"]);
        let joined = digest(&[b"abcdef"]);
        assert_eq!(split, joined);
    }

    #[test]
    fn tags_separate_domains() {
        let a = digest(&[&[TAG_STREAM_KEY], b"key"]);
        let b = digest(&[&[TAG_MAC_KEY], b"key"]);
        assert_ne!(a, b);
    }
}
