//! Word-width abstraction over the Michael block function.
//!
//! The real MIC uses 32-bit words. [`Michael16`] is a reduced-width variant
//! with the same structure (rotations taken mod 16, byte swap within each
//! 16-bit word) whose magic-word domain is only 2^16, so collision searches
//! can be cross-checked by exhaustive enumeration.

use std::fmt::Debug;
use std::hash::Hash;
use std::ops::BitXor;

pub trait Width: Copy + Send + Sync + 'static {
    type Word: Copy
        + Default
        + Eq
        + Ord
        + Hash
        + Debug
        + Send
        + Sync
        + BitXor<Output = Self::Word>
        + Into<u64>;

    const BITS: u32;

    fn block(l: Self::Word, r: Self::Word) -> (Self::Word, Self::Word);

    fn inverse_block(l: Self::Word, r: Self::Word) -> (Self::Word, Self::Word);

    /// Truncating conversion used to walk the search domain.
    fn from_index(i: u64) -> Self::Word;

    /// Size of the magic-word domain, `2^BITS`.
    fn domain() -> u64 {
        1u64 << Self::BITS
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Michael32;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Michael16;

#[inline(always)]
fn xswap32(x: u32) -> u32 {
    ((x & 0xff00_ff00) >> 8) | ((x & 0x00ff_00ff) << 8)
}

impl Width for Michael32 {
    type Word = u32;
    const BITS: u32 = 32;

    #[inline(always)]
    fn block(l: u32, r: u32) -> (u32, u32) {
        let r = r ^ l.rotate_left(17);
        let l = l.wrapping_add(r);
        let r = r ^ xswap32(l);
        let l = l.wrapping_add(r);
        let r = r ^ l.rotate_left(3);
        let l = l.wrapping_add(r);
        let r = r ^ l.rotate_right(2);
        let l = l.wrapping_add(r);
        (l, r)
    }

    #[inline(always)]
    fn inverse_block(l: u32, r: u32) -> (u32, u32) {
        let l = l.wrapping_sub(r);
        let r = r ^ l.rotate_right(2);
        let l = l.wrapping_sub(r);
        let r = r ^ l.rotate_left(3);
        let l = l.wrapping_sub(r);
        let r = r ^ xswap32(l);
        let l = l.wrapping_sub(r);
        let r = r ^ l.rotate_left(17);
        (l, r)
    }

    #[inline(always)]
    fn from_index(i: u64) -> u32 {
        i as u32
    }
}

impl Width for Michael16 {
    type Word = u16;
    const BITS: u32 = 16;

    #[inline(always)]
    fn block(l: u16, r: u16) -> (u16, u16) {
        let r = r ^ l.rotate_left(1);
        let l = l.wrapping_add(r);
        let r = r ^ l.swap_bytes();
        let l = l.wrapping_add(r);
        let r = r ^ l.rotate_left(3);
        let l = l.wrapping_add(r);
        let r = r ^ l.rotate_right(2);
        let l = l.wrapping_add(r);
        (l, r)
    }

    #[inline(always)]
    fn inverse_block(l: u16, r: u16) -> (u16, u16) {
        let l = l.wrapping_sub(r);
        let r = r ^ l.rotate_right(2);
        let l = l.wrapping_sub(r);
        let r = r ^ l.rotate_left(3);
        let l = l.wrapping_sub(r);
        let r = r ^ l.swap_bytes();
        let l = l.wrapping_sub(r);
        let r = r ^ l.rotate_left(1);
        (l, r)
    }

    #[inline(always)]
    fn from_index(i: u64) -> u16 {
        i as u16
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_is_fixed() {
        assert_eq!(Michael32::block(0, 0), (0, 0));
        assert_eq!(Michael16::block(0, 0), (0, 0));
        assert_eq!(Michael16::inverse_block(0, 0), (0, 0));
    }

    #[test]
    fn narrow_roundtrip_sampled() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..100_000 {
            let (l, r): (u16, u16) = (rng.gen(), rng.gen());
            let (a, b) = Michael16::block(l, r);
            assert_eq!(Michael16::inverse_block(a, b), (l, r));
        }
    }

    // Full 2^32 state sweep of the narrow variant; a few seconds in release.
    #[test]
    #[ignore]
    fn narrow_bijective_exhaustive() {
        for l in 0..=u16::MAX {
            for r in 0..=u16::MAX {
                let (a, b) = Michael16::block(l, r);
                assert_eq!(Michael16::inverse_block(a, b), (l, r));
            }
        }
    }
}
