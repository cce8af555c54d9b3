//! Domain scanning for magic words.
//!
//! Both finders walk one 2^BITS word domain in ascending order. The domain is
//! cut into fixed-size chunks that workers claim from a shared counter, so
//! chunks are always handed out in ascending order. A worker that finds a hit
//! lowers the shared `best` index and nobody claims a chunk that starts past
//! it, which keeps the parallel result identical to the sequential one: the
//! lowest-index solution in the range.

use std::collections::HashMap;
use std::ops::Range;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use super::{CollisionError, FilterSpec};
use crate::michael::Width;

/// Michael state `(l, r)` or a magic-word pair.
type Pair<W> = (<W as Width>::Word, <W as Width>::Word);

const BATCH: usize = 64;

#[derive(Debug, Clone)]
pub struct SearchOptions {
    pub workers: usize,
    /// Domain words per claimed chunk.
    pub chunk: u64,
    pub cancel: Option<Arc<AtomicBool>>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            workers: std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
            chunk: 1 << 20,
            cancel: None,
        }
    }
}

impl SearchOptions {
    pub fn sequential() -> Self {
        Self {
            workers: 1,
            ..Self::default()
        }
    }

    pub fn with_workers(workers: usize) -> Self {
        Self {
            workers: workers.max(1),
            ..Self::default()
        }
    }

    fn cancelled(&self) -> bool {
        self.cancel
            .as_ref()
            .map(|c| c.load(Ordering::Relaxed))
            .unwrap_or(false)
    }
}

/// A hit from the single-state scan over the first magic word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NaiveHit<W: Width> {
    pub mw1: W::Word,
    pub mw2: W::Word,
    /// Number of domain words examined, counting the hit itself.
    pub position: u64,
}

/// A hit from the multi-state scan over the second magic word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilteredHit<W: Width> {
    pub variant_id: u32,
    pub mw1: W::Word,
    pub mw2: W::Word,
    pub position: u64,
}

fn check_range<W: Width>(range: &Range<u64>) -> Result<(), CollisionError> {
    if range.start > range.end || range.end > W::domain() {
        return Err(CollisionError::InvalidRange {
            start: range.start,
            end: range.end,
            domain: W::domain(),
        });
    }
    Ok(())
}

/// Run `scan_chunk` over `range` in chunks and return the lowest hit.
fn drive<T, F>(range: Range<u64>, opts: &SearchOptions, scan_chunk: F) -> Result<(u64, T), CollisionError>
where
    T: Send,
    F: Fn(Range<u64>) -> Option<(u64, T)> + Sync,
{
    let chunk = opts.chunk.max(BATCH as u64);
    let next = AtomicU64::new(0);
    let best = AtomicU64::new(u64::MAX);
    let found: Mutex<Option<(u64, T)>> = Mutex::new(None);
    let stopped = AtomicBool::new(false);

    let worker = || loop {
        let c = next.fetch_add(1, Ordering::Relaxed);
        let start = match c.checked_mul(chunk).and_then(|o| range.start.checked_add(o)) {
            Some(s) if s < range.end => s,
            _ => break,
        };
        if start > best.load(Ordering::Acquire) {
            break;
        }
        if opts.cancelled() {
            stopped.store(true, Ordering::Relaxed);
            break;
        }
        let end = (start + chunk).min(range.end);
        if let Some((i, t)) = scan_chunk(start..end) {
            best.fetch_min(i, Ordering::AcqRel);
            let mut slot = found.lock().unwrap();
            if slot.as_ref().map(|(j, _)| i < *j).unwrap_or(true) {
                *slot = Some((i, t));
            }
        }
    };

    if opts.workers <= 1 {
        worker();
    } else {
        std::thread::scope(|s| {
            for _ in 0..opts.workers {
                s.spawn(worker);
            }
        });
    }

    match found.into_inner().unwrap() {
        Some(hit) => Ok(hit),
        None if stopped.load(Ordering::Relaxed) => Err(CollisionError::Cancelled),
        None => Err(CollisionError::NotFound),
    }
}

/// Scan the first magic word for a single initial state.
///
/// `(l3, r2) = inverse_block(target)` fixes the right word every candidate
/// must reach after one forward block; the second word then follows from the
/// left words.
pub fn search_naive<W: Width>(
    initial: Pair<W>,
    target: Pair<W>,
    range: Range<u64>,
    opts: &SearchOptions,
) -> Result<NaiveHit<W>, CollisionError> {
    check_range::<W>(&range)?;
    let (la, ra) = initial;
    let (l3, r2) = W::inverse_block(target.0, target.1);
    let start = range.start;

    let scan = |sub: Range<u64>| -> Option<(u64, Pair<W>)> {
        let mut rights = [W::Word::default(); BATCH];
        let mut base = sub.start;
        while base < sub.end {
            let n = ((sub.end - base) as usize).min(BATCH);
            for (j, out) in rights[..n].iter_mut().enumerate() {
                let mw1 = W::from_index(base + j as u64);
                *out = W::block(la ^ mw1, ra).1;
            }
            for (j, &r) in rights[..n].iter().enumerate() {
                if r == r2 {
                    let mw1 = W::from_index(base + j as u64);
                    let (l2, _) = W::block(la ^ mw1, ra);
                    let mw2 = l2 ^ l3;
                    if forward::<W>(initial, mw1, mw2) == target {
                        return Some((base + j as u64, (mw1, mw2)));
                    }
                }
            }
            base += n as u64;
        }
        None
    };

    let (i, (mw1, mw2)) = drive(range, opts, scan)?;
    Ok(NaiveHit {
        mw1,
        mw2,
        position: i - start + 1,
    })
}

/// Scan the second magic word against many initial states at once.
///
/// Every candidate is walked back two blocks from the target; the resulting
/// right word is first tested against the `n`-bit filter and only then looked
/// up among the surviving subset. Subset entries store right words only, so
/// the left word is taken from `states` and the pair is verified forward.
pub fn search_filtered<W: Width>(
    states: &[(u32, Pair<W>)],
    filter: &FilterSpec,
    target: Pair<W>,
    range: Range<u64>,
    opts: &SearchOptions,
) -> Result<FilteredHit<W>, CollisionError> {
    check_range::<W>(&range)?;
    if states.is_empty() || filter.subset.is_empty() {
        return Err(CollisionError::EmptyInput);
    }
    if filter.n == 0 || filter.n > W::BITS {
        return Err(CollisionError::InvalidFilterWidth(filter.n));
    }
    let by_id: HashMap<u32, Pair<W>> = states.iter().copied().collect();
    let mut subset: Vec<(u32, u32)> = filter.subset.iter().map(|&(id, r)| (r, id)).collect();
    subset.sort_unstable();
    let mask = filter.mask();
    let want = filter.filter;
    let (l3, r2) = W::inverse_block(target.0, target.1);
    let start = range.start;

    let scan = |sub: Range<u64>| -> Option<(u64, (u32, Pair<W>))> {
        let mut rights = [0u32; BATCH];
        let mut base = sub.start;
        while base < sub.end {
            let n = ((sub.end - base) as usize).min(BATCH);
            for (j, out) in rights[..n].iter_mut().enumerate() {
                let mw2 = W::from_index(base + j as u64);
                let (_, ra) = W::inverse_block(l3 ^ mw2, r2);
                *out = Into::<u64>::into(ra) as u32;
            }
            for (j, &ra) in rights[..n].iter().enumerate() {
                if ra & mask != want {
                    continue;
                }
                let lo = subset.partition_point(|&(r, _)| r < ra);
                for &(r, id) in subset[lo..].iter().take_while(|(r, _)| *r == ra) {
                    debug_assert_eq!(r, ra);
                    let Some(&(la, ra_word)) = by_id.get(&id) else {
                        continue;
                    };
                    let mw2 = W::from_index(base + j as u64);
                    let (l1, _) = W::inverse_block(l3 ^ mw2, r2);
                    let mw1 = l1 ^ la;
                    if forward::<W>((la, ra_word), mw1, mw2) == target {
                        return Some((base + j as u64, (id, (mw1, mw2))));
                    }
                }
            }
            base += n as u64;
        }
        None
    };

    let (i, (variant_id, (mw1, mw2))) = drive(range, opts, scan)?;
    Ok(FilteredHit {
        variant_id,
        mw1,
        mw2,
        position: i - start + 1,
    })
}

/// Apply both magic words to `s` and return the resulting state.
#[inline]
pub fn forward<W: Width>(s: Pair<W>, mw1: W::Word, mw2: W::Word) -> Pair<W> {
    let (l, r) = W::block(s.0 ^ mw1, s.1);
    W::block(l ^ mw2, r)
}
