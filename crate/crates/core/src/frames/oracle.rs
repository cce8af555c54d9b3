//! Per-packet keystream source.
//!
//! Real TKIP derives an RC4 key per TSC through two mixing phases. Nothing in
//! the attacks depends on how the stream is produced, only that it is a fixed
//! function of `(temporal key, TSC)`, so the simulator uses a stand-in.

use serde::{Deserialize, Serialize};

use crate::michael::MichaelState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TemporalKey(pub [u32; 4]);

pub trait KeystreamOracle {
    fn keystream(&self, key: &TemporalKey, tsc: u64, len: usize) -> Vec<u8>;
}

/// Michael block function run in counter mode.
///
/// Output block `i` starts from `(k0 ^ tsc_lo32, k1 ^ tsc_hi16 ^ i << 16)`,
/// absorbs `k2` and `k3` alternately for eight rounds and emits `l ‖ r`
/// little-endian.
#[derive(Debug, Clone, Copy, Default)]
pub struct MichaelCtr;

impl KeystreamOracle for MichaelCtr {
    fn keystream(&self, key: &TemporalKey, tsc: u64, len: usize) -> Vec<u8> {
        let [k0, k1, k2, k3] = key.0;
        let mut out = Vec::with_capacity(len + 8);
        let mut i = 0u32;
        while out.len() < len {
            let mut s = MichaelState::new(
                k0 ^ tsc as u32,
                k1 ^ ((tsc >> 32) as u32 & 0xffff) ^ (i << 16),
            );
            for round in 0..8 {
                s = s.absorb(if round % 2 == 0 { k2 } else { k3 });
            }
            out.extend_from_slice(&s.to_mic());
            i += 1;
        }
        out.truncate(len);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_prefix_stable() {
        let k = TemporalKey([1, 2, 3, 4]);
        let a = MichaelCtr.keystream(&k, 42, 100);
        assert_eq!(a, MichaelCtr.keystream(&k, 42, 100));
        assert_eq!(&a[..13], &MichaelCtr.keystream(&k, 42, 13)[..]);
        assert_ne!(a, MichaelCtr.keystream(&k, 43, 100));
        assert_ne!(a, MichaelCtr.keystream(&TemporalKey([1, 2, 3, 5]), 42, 100));
    }
}
