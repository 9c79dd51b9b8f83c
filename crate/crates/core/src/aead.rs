//! Authenticated envelope: a cleartext header that is authenticated but not
//! encrypted, an encrypted body, and one MAC covering nonce, header, and
//! ciphertext.
//!
//! The construction is hash-based encrypt-then-MAC. Encryption and MAC use
//! independent subkeys derived from the envelope key, the keystream is
//! counter-mode over the nonce, and the tag is computed over
//! length-delimited fields so header/body boundaries are unambiguous.
//! Decryption releases nothing unless the tag verifies.

use thiserror::Error;

use crate::hash::{self, TAG_MAC_KEY, TAG_STREAM_KEY};

pub const NONCE_BYTES: usize = 16;
pub const TAG_BYTES: usize = 16;
pub const ENVELOPE_VERSION: u8 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("envelope authentication failed")]
pub struct AuthFailure;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("malformed envelope: {0}")]
pub struct CodecError(pub &'static str);

/// Wire message: `version(1) || N(16) || |A|(4) || A || |C|(4) || C || T(16)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub nonce: [u8; NONCE_BYTES],
    pub header: Vec<u8>,
    pub ciphertext: Vec<u8>,
    pub tag: [u8; TAG_BYTES],
}

/// Build the standard nonce: 8-byte sender address followed by a big-endian
/// frame counter. Nonce uniqueness per key is the caller's contract and is
/// what the frame counters upstream enforce.
pub fn nonce_for(sender: &[u8; 8], frame_counter: u64) -> [u8; NONCE_BYTES] {
    let mut n = [0u8; NONCE_BYTES];
    n[..8].copy_from_slice(sender);
    n[8..].copy_from_slice(&frame_counter.to_be_bytes());
    n
}

fn keystream_xor(key: &[u8; 16], nonce: &[u8; NONCE_BYTES], data: &mut [u8]) {
    let stream_key = hash::digest(&[&[TAG_STREAM_KEY], key]);
    for (block_index, chunk) in data.chunks_mut(32).enumerate() {
        let block = hash::digest(&[
            &stream_key,
            nonce,
            &(block_index as u32).to_be_bytes(),
        ]);
        for (b, k) in chunk.iter_mut().zip(block.iter()) {
            *b ^= k;
        }
    }
}

fn compute_tag(
    key: &[u8; 16],
    nonce: &[u8; NONCE_BYTES],
    header: &[u8],
    ciphertext: &[u8],
) -> [u8; TAG_BYTES] {
    let mac_key = hash::digest(&[&[TAG_MAC_KEY], key]);
    hash::digest16(&[
        &mac_key,
        nonce,
        &(header.len() as u64).to_be_bytes(),
        header,
        &(ciphertext.len() as u64).to_be_bytes(),
        ciphertext,
    ])
}

fn ct_eq(a: &[u8], b: &[u8]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

/// Encrypt `plaintext` and authenticate it together with the cleartext
/// `header` under `key`.
pub fn seal(key: &[u8; 16], nonce: [u8; NONCE_BYTES], header: &[u8], plaintext: &[u8]) -> Envelope {
    let mut ciphertext = plaintext.to_vec();
    keystream_xor(key, &nonce, &mut ciphertext);
    let tag = compute_tag(key, &nonce, header, &ciphertext);
    Envelope {
        nonce,
        header: header.to_vec(),
        ciphertext,
        tag,
    }
}

/// Verify and decrypt. The tag comparison is constant-time and no plaintext
/// is produced on mismatch.
pub fn open(key: &[u8; 16], env: &Envelope) -> Result<Vec<u8>, AuthFailure> {
    let expected = compute_tag(key, &env.nonce, &env.header, &env.ciphertext);
    if !ct_eq(&expected, &env.tag) {
        return Err(AuthFailure);
    }
    let mut plaintext = env.ciphertext.clone();
    keystream_xor(key, &env.nonce, &mut plaintext);
    Ok(plaintext)
}

impl Envelope {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out =
            Vec::with_capacity(1 + NONCE_BYTES + 8 + self.header.len() + self.ciphertext.len() + TAG_BYTES);
        out.push(ENVELOPE_VERSION);
        out.extend_from_slice(&self.nonce);
        out.extend_from_slice(&(self.header.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.header);
        out.extend_from_slice(&(self.ciphertext.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.ciphertext);
        out.extend_from_slice(&self.tag);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Envelope, CodecError> {
        if bytes.len() < 1 + NONCE_BYTES + 4 {
            return Err(CodecError("truncated"));
        }
        if bytes[0] != ENVELOPE_VERSION {
            return Err(CodecError("unsupported version"));
        }
        let mut nonce = [0u8; NONCE_BYTES];
        nonce.copy_from_slice(&bytes[1..17]);
        let header_len = u32::from_be_bytes(bytes[17..21].try_into().unwrap()) as usize;
        let rest = &bytes[21..];
        if rest.len() < header_len + 4 {
            return Err(CodecError("truncated header"));
        }
        let header = rest[..header_len].to_vec();
        let rest = &rest[header_len..];
        let body_len = u32::from_be_bytes(rest[..4].try_into().unwrap()) as usize;
        let rest = &rest[4..];
        if rest.len() != body_len + TAG_BYTES {
            return Err(CodecError("length mismatch"));
        }
        let ciphertext = rest[..body_len].to_vec();
        let mut tag = [0u8; TAG_BYTES];
        tag.copy_from_slice(&rest[body_len..]);
        Ok(Envelope {
            nonce,
            header,
            ciphertext,
            tag,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drbg::Drbg;

    fn sample() -> ([u8; 16], Envelope) {
        let key = [0x42u8; 16];
        let nonce = nonce_for(&[1, 2, 3, 4, 5, 6, 7, 8], 77);
        let env = seal(&key, nonce, b"header-bytes", b"the payload");
        (key, env)
    }

    #[test]
    fn roundtrip_many_random_inputs() {
        let mut drbg = Drbg::from_u64(100);
        for _ in 0..1000 {
            let key: [u8; 16] = drbg.gen();
            let nonce: [u8; 16] = drbg.gen();
            let header_len = (drbg.u64() % 40) as usize;
            let header = drbg.vec(header_len);
            let body_len = (drbg.u64() % 200) as usize;
            let plaintext = drbg.vec(body_len);
            let env = seal(&key, nonce, &header, &plaintext);
            assert_eq!(open(&key, &env).unwrap(), plaintext);
        }
    }

    #[test]
    fn empty_plaintext_still_binds_header() {
        let key = [1u8; 16];
        let env = seal(&key, [0u8; 16], b"only-authenticated", b"");
        assert!(env.ciphertext.is_empty());
        assert_eq!(open(&key, &env).unwrap(), b"");
        let mut tampered = env.clone();
        tampered.header[0] ^= 0x01;
        assert_eq!(open(&key, &tampered).unwrap_err(), AuthFailure);
    }

    #[test]
    fn wrong_key_rejected() {
        let (_, env) = sample();
        assert_eq!(open(&[0x43u8; 16], &env).unwrap_err(), AuthFailure);
    }

    #[test]
    fn any_single_bit_flip_is_rejected() {
        let (key, env) = sample();
        let mut tampered = env.clone();
        for (what, field) in [
            ("nonce", 0usize),
            ("header", 1),
            ("ciphertext", 2),
            ("tag", 3),
        ] {
            let len = match field {
                0 => tampered.nonce.len(),
                1 => tampered.header.len(),
                2 => tampered.ciphertext.len(),
                _ => tampered.tag.len(),
            };
            for byte in 0..len {
                for bit in 0..8 {
                    let mask = 1u8 << bit;
                    match field {
                        0 => tampered.nonce[byte] ^= mask,
                        1 => tampered.header[byte] ^= mask,
                        2 => tampered.ciphertext[byte] ^= mask,
                        _ => tampered.tag[byte] ^= mask,
                    }
                    assert_eq!(open(&key, &tampered), Err(AuthFailure), "{what}[{byte}].{bit}");
                    match field {
                        0 => tampered.nonce[byte] ^= mask,
                        1 => tampered.header[byte] ^= mask,
                        2 => tampered.ciphertext[byte] ^= mask,
                        _ => tampered.tag[byte] ^= mask,
                    }
                }
            }
        }
        assert_eq!(open(&key, &tampered).unwrap(), b"the payload");
    }

    #[test]
    fn wire_roundtrip() {
        let (_, env) = sample();
        assert_eq!(Envelope::from_bytes(&env.to_bytes()).unwrap(), env);
    }

    #[test]
    fn wire_rejects_garbage() {
        assert!(Envelope::from_bytes(&[]).is_err());
        assert!(Envelope::from_bytes(&[2u8; 40]).is_err());
        let (_, env) = sample();
        let mut bytes = env.to_bytes();
        bytes.pop();
        assert!(Envelope::from_bytes(&bytes).is_err());
    }

    #[test]
    fn keystream_blocks_differ_per_position() {
        // A plaintext longer than one hash block must not repeat keystream.
        let key = [9u8; 16];
        let env = seal(&key, [0u8; 16], b"", &[0u8; 96]);
        let blocks: Vec<&[u8]> = env.ciphertext.chunks(32).collect();
        assert_ne!(blocks[0], blocks[1]);
        assert_ne!(blocks[1], blocks[2]);
    }
}
