//! Seal an MSDU into fragments, open it again, and round-trip the fragments
//! through a TKPF capture file.

use tkipkit::addr::{Direction, MacAddr};
use tkipkit::frames::capture::{hex_dump, read_capture, write_capture, CaptureRecord};
use tkipkit::frames::{open, seal_fragmented, LinkKeys, MichaelCtr, Msdu, ReplayState, RxOutcome, TemporalKey};
use tkipkit::michael::{MicHeader, MicKey};

fn main() {
    let keys = LinkKeys {
        tk: TemporalKey([1, 2, 3, 4]),
        mic: MicKey::new(0x0102_0304, 0x0506_0708, Direction::ApToClient),
    };
    let (client, ap) = (MacAddr([2, 0, 0, 0, 0, 0x10]), MacAddr([2, 0, 0, 0, 0, 0x01]));
    let msdu = Msdu::new(MicHeader::new(client, ap, 2).unwrap(), b"three fragments of plain text".to_vec());

    let mpdus = seal_fragmented(&msdu, &keys, &MichaelCtr, 100, 2, &[12, 12, 0]).unwrap();
    let records: Vec<CaptureRecord> = mpdus
        .iter()
        .map(|m| CaptureRecord {
            direction: Direction::ApToClient,
            mpdu: m.clone(),
        })
        .collect();

    let mut file = Vec::new();
    write_capture(&mut file, &records).unwrap();
    let back = read_capture(&file[..]).unwrap();
    for r in &back {
        print!("{}", hex_dump(r.direction, &r.mpdu));
    }

    let mpdus: Vec<_> = back.into_iter().map(|r| r.mpdu).collect();
    let mut replay = ReplayState::new(true);
    match open(&mpdus, client, ap, &keys, &MichaelCtr, &mut replay) {
        RxOutcome::Ok(m) => println!("opened: {:?}", String::from_utf8_lossy(&m.body)),
        other => panic!("{other:?}"),
    }
    // The same fragments again are a replay.
    println!("again:  {:?}", open(&mpdus, client, ap, &keys, &MichaelCtr, &mut replay));
}
