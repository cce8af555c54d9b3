//! Michael message integrity code.
//!
//! Michael keeps a 64-bit state of two little-endian words `(l, r)`. The key
//! is loaded directly as the initial state and every 32-bit message word is
//! XORed into `l` before one application of the block function. Because the
//! block function is a bijection the whole computation can be walked
//! backwards from a MIC, which is what key recovery and the magic-word
//! search rely on.

mod width;

pub use width::{Michael16, Michael32, Width};

use serde::{Deserialize, Serialize};

use crate::addr::{Direction, MacAddr};

/// Largest MSDU body the MIC is defined over.
pub const MAX_MSDU_LEN: usize = 2304;

/// Length of the serialized pseudo-header (DA, SA, priority, 3 reserved).
pub const MIC_HEADER_LEN: usize = 16;

pub type Mic = [u8; 8];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MichaelError {
    #[error("payload of {0} bytes exceeds the {MAX_MSDU_LEN}-byte MSDU limit")]
    PayloadTooLong(usize),
    #[error("mid-stream prefix of {0} bytes is not word aligned")]
    UnalignedPrefix(usize),
    #[error("priority {0} outside 0..=7")]
    InvalidPriority(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct MichaelState {
    pub l: u32,
    pub r: u32,
}

impl MichaelState {
    pub const fn new(l: u32, r: u32) -> Self {
        Self { l, r }
    }

    /// XOR one message word into `l`, then run the block function.
    #[inline]
    pub fn absorb(self, word: u32) -> Self {
        block(MichaelState::new(self.l ^ word, self.r))
    }

    pub fn absorb_all(self, words: &[u32]) -> Self {
        words.iter().fold(self, |s, &w| s.absorb(w))
    }

    /// Undo [`absorb`](Self::absorb) for a known word.
    #[inline]
    pub fn unabsorb(self, word: u32) -> Self {
        let s = inverse_block(self);
        MichaelState::new(s.l ^ word, s.r)
    }

    pub fn to_mic(self) -> Mic {
        let mut out = [0u8; 8];
        out[..4].copy_from_slice(&self.l.to_le_bytes());
        out[4..].copy_from_slice(&self.r.to_le_bytes());
        out
    }

    pub fn from_mic(mic: &Mic) -> Self {
        MichaelState::new(
            u32::from_le_bytes([mic[0], mic[1], mic[2], mic[3]]),
            u32::from_le_bytes([mic[4], mic[5], mic[6], mic[7]]),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MicKey {
    pub k0: u32,
    pub k1: u32,
    pub direction: Direction,
}

impl MicKey {
    pub fn new(k0: u32, k1: u32, direction: Direction) -> Self {
        Self { k0, k1, direction }
    }

    /// Key in its 8-byte wire order: `k0` then `k1`, both little-endian.
    pub fn from_bytes(bytes: [u8; 8], direction: Direction) -> Self {
        let s = MichaelState::from_mic(&bytes);
        Self::new(s.l, s.r, direction)
    }

    pub fn to_bytes(&self) -> [u8; 8] {
        self.initial_state().to_mic()
    }

    pub fn initial_state(&self) -> MichaelState {
        MichaelState::new(self.k0, self.k1)
    }
}

/// The MIC pseudo-header: destination, source and priority of the MSDU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MicHeader {
    pub da: MacAddr,
    pub sa: MacAddr,
    priority: u8,
}

impl MicHeader {
    pub fn new(da: MacAddr, sa: MacAddr, priority: u8) -> Result<Self, MichaelError> {
        if priority > 7 {
            return Err(MichaelError::InvalidPriority(priority));
        }
        Ok(Self { da, sa, priority })
    }

    pub fn priority(&self) -> u8 {
        self.priority
    }

    pub fn with_priority(self, priority: u8) -> Result<Self, MichaelError> {
        Self::new(self.da, self.sa, priority)
    }

    pub fn to_bytes(&self) -> [u8; MIC_HEADER_LEN] {
        let mut out = [0u8; MIC_HEADER_LEN];
        out[..6].copy_from_slice(&self.da.0);
        out[6..12].copy_from_slice(&self.sa.0);
        out[12] = self.priority;
        out
    }

    pub fn words(&self) -> [u32; 4] {
        let b = self.to_bytes();
        let mut w = [0u32; 4];
        for (i, c) in b.chunks_exact(4).enumerate() {
            w[i] = u32::from_le_bytes([c[0], c[1], c[2], c[3]]);
        }
        w
    }
}

#[inline]
pub fn block(s: MichaelState) -> MichaelState {
    let (l, r) = Michael32::block(s.l, s.r);
    MichaelState::new(l, r)
}

#[inline]
pub fn inverse_block(s: MichaelState) -> MichaelState {
    let (l, r) = Michael32::inverse_block(s.l, s.r);
    MichaelState::new(l, r)
}

/// Little-endian words of `data` without any padding; `data` must be aligned.
pub(crate) fn aligned_words(data: &[u8]) -> Vec<u32> {
    debug_assert_eq!(data.len() % 4, 0);
    data.chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

/// Words of `data` after Michael padding: `0x5a`, zero fill to a word
/// boundary, then one extra zero word.
pub fn padded_words(data: &[u8]) -> Vec<u32> {
    let mut buf = Vec::with_capacity(data.len() + 8);
    buf.extend_from_slice(data);
    buf.push(0x5a);
    while buf.len() % 4 != 0 {
        buf.push(0);
    }
    buf.extend_from_slice(&[0; 4]);
    aligned_words(&buf)
}

/// Full word schedule for an MSDU: four header words, then the padded body.
pub fn message_words(header: &MicHeader, payload: &[u8]) -> Result<Vec<u32>, MichaelError> {
    if payload.len() > MAX_MSDU_LEN {
        return Err(MichaelError::PayloadTooLong(payload.len()));
    }
    let mut words = header.words().to_vec();
    words.extend(padded_words(payload));
    Ok(words)
}

/// Michael over raw bytes, with no pseudo-header.
pub fn michael(key: &MicKey, data: &[u8]) -> Mic {
    key.initial_state().absorb_all(&padded_words(data)).to_mic()
}

pub fn mic_compute(key: &MicKey, header: &MicHeader, payload: &[u8]) -> Result<Mic, MichaelError> {
    let words = message_words(header, payload)?;
    Ok(key.initial_state().absorb_all(&words).to_mic())
}

/// State after processing the optional header and `prefix`.
///
/// With `include_padding` the prefix is treated as a complete payload and the
/// result is the final MIC state. Without it the prefix is a mid-stream slice
/// and must be word aligned.
pub fn state_after(
    key: &MicKey,
    header: Option<&MicHeader>,
    prefix: &[u8],
    include_padding: bool,
) -> Result<MichaelState, MichaelError> {
    if prefix.len() > MAX_MSDU_LEN {
        return Err(MichaelError::PayloadTooLong(prefix.len()));
    }
    let mut s = key.initial_state();
    if let Some(h) = header {
        s = s.absorb_all(&h.words());
    }
    if include_padding {
        Ok(s.absorb_all(&padded_words(prefix)))
    } else {
        if !prefix.len().is_multiple_of(4) {
            return Err(MichaelError::UnalignedPrefix(prefix.len()));
        }
        Ok(s.absorb_all(&aligned_words(prefix)))
    }
}

/// Walk the MIC computation backwards from the final state to the key.
pub fn recover_key(
    header: &MicHeader,
    payload: &[u8],
    mic: &Mic,
    direction: Direction,
) -> Result<MicKey, MichaelError> {
    let words = message_words(header, payload)?;
    let s = words
        .iter()
        .rev()
        .fold(MichaelState::from_mic(mic), |s, &w| s.unabsorb(w));
    Ok(MicKey::new(s.l, s.r, direction))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hdr() -> MicHeader {
        MicHeader::new(
            MacAddr([2, 0, 0, 0, 0, 1]),
            MacAddr([2, 0, 0, 0, 0, 2]),
            3,
        )
        .unwrap()
    }

    #[test]
    fn header_serialization() {
        let b = hdr().to_bytes();
        assert_eq!(&b[..6], &[2, 0, 0, 0, 0, 1]);
        assert_eq!(&b[6..12], &[2, 0, 0, 0, 0, 2]);
        assert_eq!(&b[12..], &[3, 0, 0, 0]);
        assert_eq!(
            MicHeader::new(MacAddr::ZERO, MacAddr::ZERO, 8),
            Err(MichaelError::InvalidPriority(8))
        );
    }

    // Chained reference vectors: each MIC is the key for the next message.
    const CHAIN: [(&str, &[u8], &str); 6] = [
        ("0000000000000000", b"", "82925c1ca1d130b8"),
        ("82925c1ca1d130b8", b"M", "434721ca40639b3f"),
        ("434721ca40639b3f", b"Mi", "e8f9becae97e5d29"),
        ("e8f9becae97e5d29", b"Mic", "90038fc6cf13c1db"),
        ("90038fc6cf13c1db", b"Mich", "d55e100510128986"),
        ("d55e100510128986", b"Michael", "0a942b124ecaa546"),
    ];

    fn key_hex(s: &str) -> MicKey {
        let mut b = [0u8; 8];
        hex::decode_to_slice(s, &mut b).unwrap();
        MicKey::from_bytes(b, Direction::ApToClient)
    }

    #[test]
    fn reference_vectors() {
        for (key, msg, mic) in CHAIN {
            assert_eq!(hex::encode(michael(&key_hex(key), msg)), mic, "message {msg:?}");
        }
    }

    #[test]
    fn block_vectors() {
        let cases = [
            ((0, 0), (0, 0)),
            ((0x0123_4567, 0x89ab_cdef), (0x6a5f_9115, 0xde3e_2271)),
            ((0xdead_beef, 0x00c0_ffee), (0xc4da_5413, 0xe7fc_c747)),
            ((1, 0), (0x6b51_9593, 0x572b_8b8a)),
        ];
        for ((l, r), (l2, r2)) in cases {
            assert_eq!(block(MichaelState::new(l, r)), MichaelState::new(l2, r2));
            assert_eq!(inverse_block(MichaelState::new(l2, r2)), MichaelState::new(l, r));
        }
    }

    #[test]
    fn header_vector() {
        let k = key_hex("0011223344556677");
        let m = mic_compute(&k, &hdr(), b"hello world").unwrap();
        assert_eq!(hex::encode(m), "76079df6a7f410fa");
    }

    #[test]
    fn padding_rule() {
        let h = hdr();
        let w = message_words(&h, b"").unwrap();
        assert_eq!(w.len(), 6);
        assert_eq!(&w[4..], &[0x0000_005a, 0]);

        let w = message_words(&h, &[0x11, 0x22, 0x33]).unwrap();
        assert_eq!(&w[4..], &[0x5a33_2211, 0]);

        let w = message_words(&h, &[1, 2, 3, 4]).unwrap();
        assert_eq!(&w[4..], &[0x0403_0201, 0x5a, 0]);

        assert_eq!(
            message_words(&h, &vec![0; MAX_MSDU_LEN + 1]),
            Err(MichaelError::PayloadTooLong(MAX_MSDU_LEN + 1))
        );
    }

    #[test]
    fn state_after_modes() {
        let k = MicKey::new(0x1234, 0x5678, Direction::ApToClient);
        let h = hdr();
        assert_eq!(state_after(&k, None, b"", false).unwrap(), k.initial_state());
        let full = state_after(&k, Some(&h), b"hello", true).unwrap();
        assert_eq!(full.to_mic(), mic_compute(&k, &h, b"hello").unwrap());
        assert_eq!(
            state_after(&k, Some(&h), b"abc", false),
            Err(MichaelError::UnalignedPrefix(3))
        );
    }

    // Step-by-step trace of a 4-byte prefix after the header words.
    #[test]
    fn state_after_matches_trace() {
        let k = MicKey::new(0xdead_beef, 0x0bad_f00d, Direction::ApToClient);
        let h = hdr();
        let hw = h.words();
        let mut l = k.k0;
        let mut r = k.k1;
        for w in hw.iter().chain(std::iter::once(&0x6463_6261u32)) {
            l ^= w;
            let (a, b) = Michael32::block(l, r);
            l = a;
            r = b;
        }
        assert_eq!(
            state_after(&k, Some(&h), b"abcd", false).unwrap(),
            MichaelState::new(l, r)
        );
    }

    #[test]
    fn flipped_mic_gives_different_key() {
        let k = MicKey::new(0x0102_0304, 0x0506_0708, Direction::ApToClient);
        let h = hdr();
        let p = b"payload bytes";
        let mut mic = mic_compute(&k, &h, p).unwrap();
        mic[5] ^= 0x10;
        let k2 = recover_key(&h, p, &mic, Direction::ApToClient).unwrap();
        assert_ne!(k2, k);
        // The forged key reproduces the flipped MIC, not the original one.
        assert_eq!(mic_compute(&k2, &h, p).unwrap(), mic);
        assert_ne!(mic_compute(&k2, &h, p).unwrap(), mic_compute(&k, &h, p).unwrap());
    }

    proptest! {
        #[test]
        fn recover_inverts_compute(
            k0: u32, k1: u32, da: [u8; 6], sa: [u8; 6], prio in 0u8..8,
            payload in proptest::collection::vec(any::<u8>(), 0..300),
        ) {
            let k = MicKey::new(k0, k1, Direction::ClientToAp);
            let h = MicHeader::new(MacAddr(da), MacAddr(sa), prio).unwrap();
            let mic = mic_compute(&k, &h, &payload).unwrap();
            prop_assert_eq!(recover_key(&h, &payload, &mic, Direction::ClientToAp).unwrap(), k);
        }

        #[test]
        fn absorb_unabsorb(l: u32, r: u32, w: u32) {
            let s = MichaelState::new(l, r);
            prop_assert_eq!(s.absorb(w).unabsorb(w), s);
        }
    }
}
