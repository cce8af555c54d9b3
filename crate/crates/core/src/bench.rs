//! Filtered collision benchmark: one random key per row.
//!
//! `domain_fraction` (scanned words over 2^32) is the hardware-independent
//! figure; `wall_time_ms` covers filter construction and search only.

use std::io::Write;
use std::net::Ipv4Addr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::addr::{Direction, MacAddr};
use crate::attacks::icmp_insert_template;
use crate::collision::{
    build_filter, find_magic_words_filtered, gen_variants, Anchor, CollisionError, CollisionProblem, SearchOptions,
    VariantStrategy, FULL_DOMAIN,
};
use crate::michael::{MicHeader, MicKey};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub n: u32,
    /// `2^k` variants per key.
    pub k: u32,
    pub keys: usize,
    pub seed: u64,
    pub anchor: Anchor,
    pub search: SearchOptions,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n: 8,
            k: 16,
            keys: 1024,
            seed: 0,
            anchor: Anchor::KeyState,
            search: SearchOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub key_index: usize,
    pub n: u32,
    pub k: u32,
    pub wall_time_ms: f64,
    pub iterations: u64,
    pub domain_fraction: f64,
    pub variant_id: u32,
    pub mw1_hex: String,
    pub mw2_hex: String,
}

fn random_mac(rng: &mut ChaCha8Rng) -> MacAddr {
    let mut m: [u8; 6] = rng.gen();
    m[0] = (m[0] | 0x02) & 0xfe;
    MacAddr(m)
}

/// Run one key of the benchmark; the instance depends only on `seed` and
/// `key_index`.
pub fn bench_one(cfg: &BenchConfig, key_index: usize) -> Result<BenchRow, CollisionError> {
    let strategy = if cfg.k <= 16 {
        VariantStrategy::Ipv4IdSweep
    } else {
        VariantStrategy::IcmpIdSeqSweep
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (key_index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let key = MicKey::new(rng.gen(), rng.gen(), Direction::ApToClient);
    let (da, sa) = (random_mac(&mut rng), random_mac(&mut rng));
    let orig = MicHeader::new(da, sa, rng.gen_range(0..8))?;
    let new = orig.with_priority(rng.gen_range(0..8))?;
    let template = icmp_insert_template(
        Ipv4Addr::from(rng.gen::<u32>()),
        Ipv4Addr::from(rng.gen::<u32>()),
        rng.gen(),
        0,
        rng.gen_range(60..1400),
    );
    let states = gen_variants(&template, strategy, 1u64 << cfg.k, &key, &new)?;
    let problem = CollisionProblem::new(key, states, cfg.anchor, &orig)?;

    let t0 = Instant::now();
    let filter = build_filter(&problem.right_words(), cfg.n)?;
    let sol = find_magic_words_filtered(&problem, &filter, FULL_DOMAIN, &cfg.search)?;
    let wall = t0.elapsed();

    Ok(BenchRow {
        key_index,
        n: cfg.n,
        k: cfg.k,
        wall_time_ms: wall.as_secs_f64() * 1e3,
        iterations: sol.position,
        domain_fraction: sol.position as f64 / FULL_DOMAIN.end as f64,
        variant_id: sol.variant_id,
        mw1_hex: format!("{:08x}", sol.words.mw1),
        mw2_hex: format!("{:08x}", sol.words.mw2),
    })
}

/// Run all keys, writing CSV rows to `out` as they complete.
pub fn bench_collide<W: Write>(cfg: &BenchConfig, out: W) -> Result<Vec<BenchRow>, BenchError> {
    let mut w = csv::Writer::from_writer(out);
    let mut rows = Vec::with_capacity(cfg.keys);
    for i in 0..cfg.keys {
        let row = bench_one(cfg, i)?;
        w.serialize(&row)?;
        w.flush()?;
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Collision(#[from] CollisionError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchStats {
    pub rows: usize,
    pub mean_fraction: f64,
    pub p95_fraction: f64,
    pub mean_ms: f64,
    pub p95_ms: f64,
    /// Naive expectation of 2^31 iterations over the mean iteration count.
    pub speedup: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let i = ((sorted.len() as f64 * q).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[i]
}

pub fn summarize(rows: &[BenchRow]) -> Option<BenchStats> {
    if rows.is_empty() {
        return None;
    }
    let n = rows.len() as f64;
    let mut fr: Vec<f64> = rows.iter().map(|r| r.domain_fraction).collect();
    let mut ms: Vec<f64> = rows.iter().map(|r| r.wall_time_ms).collect();
    fr.sort_by(f64::total_cmp);
    ms.sort_by(f64::total_cmp);
    let mean_iter = rows.iter().map(|r| r.iterations as f64).sum::<f64>() / n;
    Some(BenchStats {
        rows: rows.len(),
        mean_fraction: fr.iter().sum::<f64>() / n,
        p95_fraction: quantile(&fr, 0.95),
        mean_ms: ms.iter().sum::<f64>() / n,
        p95_ms: quantile(&ms, 0.95),
        speedup: (1u64 << 31) as f64 / mean_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_reproducible_and_verify() {
        let cfg = BenchConfig {
            k: 12,
            keys: 2,
            seed: 7,
            search: SearchOptions::sequential(),
            ..BenchConfig::default()
        };
        let mut buf = Vec::new();
        let rows = bench_collide(&cfg, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("key_index,n,k,wall_time_ms,iterations,domain_fraction,variant_id,mw1_hex,mw2_hex\n"));
        assert_eq!(text.lines().count(), 3);
        let again = bench_one(&cfg, 1).unwrap();
        assert_eq!(again.iterations, rows[1].iterations);
        assert_eq!(again.mw2_hex, rows[1].mw2_hex);
    }

    #[test]
    fn quantile_is_nearest_rank() {
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(quantile(&v, 0.95), 19.0);
        assert_eq!(quantile(&v, 0.0), 1.0);
    }
}
