//! A small run of the filtered-search benchmark: majority filter width n,
//! 2^k IP-id variants, one random key per row.

use tkipkit::bench::{bench_collide, summarize, BenchConfig};

fn main() {
    let cfg = BenchConfig {
        keys: 16,
        seed: 42,
        ..BenchConfig::default()
    };
    let rows = bench_collide(&cfg, std::io::stdout()).unwrap();
    let s = summarize(&rows).unwrap();
    eprintln!(
        "n={} k={}: mean fraction {:.3}%, p95 {:.3}%, {:.0}x fewer iterations than 2^31",
        cfg.n,
        cfg.k,
        s.mean_fraction * 100.0,
        s.p95_fraction * 100.0,
        s.speedup
    );
}
