use tkipkit::addr::Direction;
use tkipkit::attacks::{
    AttackError, ChopConfig, IcmpDecryptConfig, LocalScanConfig, RemoteScanConfig, Session,
};
use tkipkit::frames::icv;
use tkipkit::keystream::Provenance;
use tkipkit::simnet::{run, Attacker, Scenario, SECOND};

/// Chop the first ARP frame; returns the session with the key learned.
fn chop_first_arp(a: &mut Attacker<'_>, s: &mut Session) -> Result<tkipkit::attacks::ChopResult, AttackError> {
    let arp = s.await_arp(a, 30 * SECOND).expect("an ARP frame within 30 s");
    s.chopchop(a, &arp, &ChopConfig::default())
}

#[test]
fn chopchop_recovers_arp_plaintext_and_mic_key() {
    let sc = Scenario::default();
    let r = run(&sc, |a| {
        let mut s = Session::new();
        chop_first_arp(a, &mut s)
    })
    .unwrap();
    let res = r.result.unwrap();
    let sent = r.audit.sent_frame(Direction::ApToClient, res.tsc).unwrap();
    let mut want = sent.body.clone();
    want.extend_from_slice(&sent.mic);
    let c = icv(&want);
    want.extend_from_slice(&c);
    assert_eq!(res.plaintext.as_deref(), Some(&want[..]));
    assert_eq!(res.plaintext_tail, want[12..]);
    assert_eq!(res.mic_key, Some(r.audit.current().down.mic));
    assert!(r.audit.countermeasures.is_empty());
    assert_eq!(r.audit.mic_failures.len(), 36);
    assert!(res.finished - res.started >= 35 * 60 * SECOND);
}

#[test]
fn local_tcp_scan_grows_exact_entries() {
    let sc = Scenario::default();
    let r = run(&sc, |a| {
        let mut s = Session::new();
        chop_first_arp(a, &mut s).unwrap();
        let rep = s.tcp_scan_local(a, &LocalScanConfig::default());
        (rep, s)
    })
    .unwrap();
    let (rep, s) = r.result;
    let rep = rep.unwrap();
    assert!(rep.confirmed.len() >= 64, "{rep:?}");
    assert!(rep.per_round[1] > rep.per_round[0]);
    for tsc in &rep.confirmed {
        let e = s.pool.get(*tsc).unwrap();
        assert_eq!(e.bytes.len(), 60);
        assert!(r.audit.entry_is_exact(e), "tsc {tsc}");
    }
    assert!(r.audit.countermeasures.is_empty());
}

#[test]
fn local_tcp_scan_fails_without_linux_resets() {
    let sc = Scenario {
        ap_linux_rst: false,
        ..Scenario::default()
    };
    let r = run(&sc, |a| {
        let mut s = Session::new();
        chop_first_arp(a, &mut s).unwrap();
        s.tcp_scan_local(a, &LocalScanConfig::default())
    })
    .unwrap();
    assert!(matches!(r.result, Err(AttackError::GuessesRejected { .. })), "{:?}", r.result);
}

#[test]
fn remote_tcp_scan_is_bounded_by_the_wan_rate() {
    let sc = Scenario {
        wan_hops: 3,
        wan_rate_kbps: 1000,
        ..Scenario::default()
    };
    let cfg = RemoteScanConfig::default();
    let r = run(&sc, |a| {
        let mut s = Session::new();
        chop_first_arp(a, &mut s).unwrap();
        let rep = s.tcp_scan_remote(a, &cfg);
        (rep, s)
    })
    .unwrap();
    let (rep, s) = r.result;
    let rep = rep.unwrap();
    assert_eq!(rep.ttl, 61);
    assert_eq!(rep.entries.len(), cfg.count);
    assert_eq!(rep.entry_len, 8 + 40 + cfg.pad_len + 12);
    for tsc in &rep.entries {
        assert!(r.audit.entry_is_exact(s.pool.get(*tsc).unwrap()), "tsc {tsc}");
    }
    let min_us = (rep.wan_bytes as u64 * 8 * 1000).div_ceil(sc.wan_rate_kbps);
    assert!(rep.finished - rep.started >= min_us);
}

#[test]
fn icmp_decryption_and_reuse() {
    let sc = Scenario::default();
    let r = run(&sc, |a| {
        let mut s = Session::new();
        chop_first_arp(a, &mut s).unwrap();
        // Let some traffic by, then take the two newest IPv4 frames.
        s.wait(a, 5 * SECOND);
        let targets: Vec<_> = s
            .captured
            .iter()
            .rev()
            .filter(|c| c.frame.len() > 64)
            .take(2)
            .map(|c| c.frame.clone())
            .collect();
        let first = s.icmp_decrypt(a, &targets[1], &IcmpDecryptConfig::default()).unwrap();
        let cfg = IcmpDecryptConfig {
            only: Some(Provenance::IcmpEchoLoop),
            ..IcmpDecryptConfig::default()
        };
        let second = s.icmp_decrypt(a, &targets[0], &cfg).unwrap();
        (first, second)
    })
    .unwrap();
    let (first, second) = r.result;
    for d in [&first, &second] {
        let sent = r.audit.sent_frame(Direction::ApToClient, d.tsc).unwrap();
        assert_eq!(d.body, sent.body);
        assert_eq!(d.mic, sent.mic);
        assert!(r.audit.entry_is_exact(&d.keystream));
    }
    assert!(first.fragments > 2);
    assert_eq!(second.fragments, 2);
    assert!(r.audit.countermeasures.is_empty());
}

#[test]
fn qos_off_defeats_chopchop() {
    let sc = Scenario {
        qos: false,
        ..Scenario::default()
    };
    let r = run(&sc, |a| {
        let mut s = Session::new();
        chop_first_arp(a, &mut s)
    })
    .unwrap();
    assert!(matches!(r.result, Err(AttackError::NoGuessAccepted { .. })), "{:?}", r.result);
}

#[test]
fn rekeying_defeats_chopchop() {
    let sc = Scenario {
        rekey_interval_s: 120,
        ..Scenario::default()
    };
    let r = run(&sc, |a| {
        let mut s = Session::new();
        chop_first_arp(a, &mut s)
    })
    .unwrap();
    assert!(matches!(r.result, Err(AttackError::NoGuessAccepted { .. })), "{:?}", r.result);
}
