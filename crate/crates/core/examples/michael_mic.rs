//! Compute a Michael MIC over a frame and walk it back to the key.

use tkipkit::addr::{Direction, MacAddr};
use tkipkit::michael::{mic_compute, recover_key, MicHeader, MicKey};

fn main() {
    let key = MicKey::new(0x1f2e_3d4c, 0x5b6a_7988, Direction::ApToClient);
    let da: MacAddr = "02:00:00:00:00:10".parse().unwrap();
    let sa: MacAddr = "02:00:00:00:00:01".parse().unwrap();
    let header = MicHeader::new(da, sa, 3).unwrap();
    let body = b"\xaa\xaa\x03\x00\x00\x00\x08\x00 pretend this is an IPv4 packet";

    let mic = mic_compute(&key, &header, body).unwrap();
    println!("mic       {}", hex::encode(mic));

    // Anyone who knows header, body and MIC gets the key back.
    let back = recover_key(&header, body, &mic, Direction::ApToClient).unwrap();
    println!("key       {}", hex::encode(key.to_bytes()));
    println!("recovered {}", hex::encode(back.to_bytes()));
    assert_eq!(back, key);
}
