//! Prime-field arithmetic for moduli up to 128 bits.
//!
//! Elements are plain `u128` values in `[0, q)`. Multiplication picks a
//! reduction strategy from the shape of the modulus:
//!
//! - `q <= 2^64`: the product fits in `u128`, native remainder.
//! - `q = 2^b - 1` with `64 < b < 128`: digit folding, no division. This is
//!   the hot path for the default modulus `2^127 - 1`.
//! - anything else: arbitrary-precision fallback.
//!
//! The three paths are cross-checked against each other in the tests; the
//! module performs no primality checks of its own.

use num_bigint::BigUint;
use num_traits::ToPrimitive;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Reduction {
    Small,
    Mersenne(u32),
    Wide,
}

/// Arithmetic context for the field `F_q`.
#[derive(Debug, Clone)]
pub struct Fq {
    q: u128,
    kind: Reduction,
}

impl Fq {
    pub fn new(q: u128) -> Fq {
        assert!(q >= 2, "modulus must be at least 2");
        let kind = if q <= u64::MAX as u128 {
            Reduction::Small
        } else {
            match q.checked_add(1) {
                Some(next) if next.is_power_of_two() => Reduction::Mersenne(next.trailing_zeros()),
                _ => Reduction::Wide,
            }
        };
        Fq { q, kind }
    }

    pub fn modulus(&self) -> u128 {
        self.q
    }

    pub fn add(&self, a: u128, b: u128) -> u128 {
        debug_assert!(a < self.q && b < self.q);
        let (sum, carry) = a.overflowing_add(b);
        if carry || sum >= self.q {
            sum.wrapping_sub(self.q)
        } else {
            sum
        }
    }

    pub fn sub(&self, a: u128, b: u128) -> u128 {
        debug_assert!(a < self.q && b < self.q);
        if a >= b {
            a - b
        } else {
            self.q - b + a
        }
    }

    pub fn neg(&self, a: u128) -> u128 {
        debug_assert!(a < self.q);
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    pub fn mul(&self, a: u128, b: u128) -> u128 {
        debug_assert!(a < self.q && b < self.q);
        match self.kind {
            Reduction::Small => (a * b) % self.q,
            Reduction::Mersenne(bits) => {
                let (hi, lo) = mul_wide(a, b);
                self.reduce_mersenne(hi, lo, bits)
            }
            Reduction::Wide => {
                let p = BigUint::from(a) * BigUint::from(b) % BigUint::from(self.q);
                p.to_u128().expect("residue fits in 128 bits")
            }
        }
    }

    /// Reduce a 256-bit value `hi * 2^128 + lo` modulo `2^bits - 1`.
    fn reduce_mersenne(&self, hi: u128, lo: u128, bits: u32) -> u128 {
        let mask = (1u128 << bits) - 1;
        let mut acc = 0u128;
        let (mut cur_lo, mut cur_hi) = (lo, hi);
        while cur_lo != 0 || cur_hi != 0 {
            // acc < 2^bits and digit < 2^bits, so the sum cannot overflow.
            let mut s = acc + (cur_lo & mask);
            s = (s & mask) + (s >> bits);
            acc = if s >= self.q { s - self.q } else { s };
            cur_lo = (cur_lo >> bits) | (cur_hi << (128 - bits));
            cur_hi >>= bits;
        }
        acc
    }
}

/// Full 128x128 -> 256-bit product, returned as (high, low) words.
fn mul_wide(a: u128, b: u128) -> (u128, u128) {
    let (a1, a0) = (a >> 64, a & 0xffff_ffff_ffff_ffff);
    let (b1, b0) = (b >> 64, b & 0xffff_ffff_ffff_ffff);
    let ll = a0 * b0;
    let lh = a0 * b1;
    let hl = a1 * b0;
    let hh = a1 * b1;
    let (mid, mid_carry) = lh.overflowing_add(hl);
    let (lo, lo_carry) = ll.overflowing_add(mid << 64);
    let hi = hh + (mid >> 64) + ((mid_carry as u128) << 64) + (lo_carry as u128);
    (hi, lo)
}
