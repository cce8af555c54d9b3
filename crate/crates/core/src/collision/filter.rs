use serde::{Deserialize, Serialize};

use super::CollisionError;

/// An `n`-bit majority filter over the low bits of right words, together with
/// the states that survived it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub n: u32,
    pub filter: u32,
    /// `(variant_id, right_word)` pairs whose low `n` bits equal `filter`.
    pub subset: Vec<(u32, u32)>,
}

impl FilterSpec {
    pub fn mask(&self) -> u32 {
        low_mask(self.n)
    }

    pub fn matches(&self, right: u32) -> bool {
        right & self.mask() == self.filter
    }
}

fn low_mask(n: u32) -> u32 {
    if n >= 32 {
        u32::MAX
    } else {
        (1u32 << n) - 1
    }
}

/// Build the filter by majority vote, least-significant bit first.
///
/// At each position the majority value becomes the filter bit and every
/// survivor carrying the minority value is dropped. Ties resolve to 0.
pub fn build_filter(right_words: &[(u32, u32)], n: u32) -> Result<FilterSpec, CollisionError> {
    if right_words.is_empty() {
        return Err(CollisionError::EmptyInput);
    }
    if n == 0 || n > 32 {
        return Err(CollisionError::InvalidFilterWidth(n));
    }
    let mut survivors = right_words.to_vec();
    let mut filter = 0u32;
    for bit in 0..n {
        let ones = survivors.iter().filter(|(_, w)| w >> bit & 1 == 1).count();
        let zeros = survivors.len() - ones;
        let keep = u32::from(ones > zeros);
        filter |= keep << bit;
        survivors.retain(|(_, w)| w >> bit & 1 == keep);
    }
    Ok(FilterSpec {
        n,
        filter,
        subset: survivors,
    })
}
