//! Core security primitives for an advanced metering network: broadcast
//! group key management, simulated hardware authentication, envelope
//! encryption, the meter-board security model, and link-layer session
//! authentication.
//!
//! Everything is deterministic given a seed — randomness flows from
//! [`drbg::Drbg`], and all derivations go through the domain-separated
//! hash in [`hash`] — so higher layers can reproduce entire protocol runs
//! bit for bit.

pub mod aead;
pub mod bgkm;
pub mod drbg;
pub mod field;
pub mod hash;
pub mod linkauth;
pub mod meterstate;
pub mod numtheory;
pub mod puf;
