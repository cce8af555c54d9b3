//! Listen to a simulated network, harvest LLC/IPv4 keystream guesses and
//! see how much can be injected with them.

use tkipkit::attacks::Session;
use tkipkit::keystream::KeystreamPool;
use tkipkit::simnet::{run, Scenario, SECOND};

fn main() {
    let sc = Scenario::default();
    let r = run(&sc, |a| {
        let mut s = Session::new();
        s.wait(a, 30 * SECOND);
        s
    })
    .unwrap();
    let s = r.result;

    let exact = s.pool.entries().filter(|e| r.audit.entry_is_exact(e)).count();
    println!("{} frames captured, {} pool entries ({} exact)", s.captured.len(), s.pool.len(), exact);
    for ch in 0..8u8 {
        match s.pool.inject_capacity(ch) {
            Ok(c) => println!("channel {ch}: up to {c} body bytes"),
            Err(e) => println!("channel {ch}: {e}"),
        }
    }

    let text = s.pool.to_tkks();
    println!("{}", text.lines().take(4).collect::<Vec<_>>().join("\n"));
    assert_eq!(KeystreamPool::from_tkks(&text).unwrap().len(), s.pool.len());
}
