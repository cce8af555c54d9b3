//! Frame capture files and hex dumps.
//!
//! Binary layout (all integers little-endian):
//!
//! ```text
//! "TKPF" | version: u8
//! record*: len: u32 | direction: u8 | tsc: 6 bytes | channel: u8
//!          | fragment: u8 (bits 0-3 number, bit 7 more-fragments) | ciphertext
//! ```
//!
//! `len` counts every byte of the record after itself.

use std::fmt::Write as _;
use std::io::{self, Read, Write};

use super::Mpdu;
use crate::addr::Direction;

pub const CAPTURE_MAGIC: &[u8; 4] = b"TKPF";
pub const CAPTURE_VERSION: u8 = 1;

const RECORD_FIXED: usize = 1 + 6 + 1 + 1;

#[derive(Debug, thiserror::Error)]
pub enum CaptureError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic or version")]
    BadHeader,
    #[error("record {index} is malformed")]
    BadRecord { index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptureRecord {
    pub direction: Direction,
    pub mpdu: Mpdu,
}

pub fn write_capture<W: Write>(mut w: W, records: &[CaptureRecord]) -> io::Result<()> {
    w.write_all(CAPTURE_MAGIC)?;
    w.write_all(&[CAPTURE_VERSION])?;
    for r in records {
        let m = &r.mpdu;
        let len = (RECORD_FIXED + m.ciphertext.len()) as u32;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(&[r.direction.as_u8()])?;
        w.write_all(&m.tsc.to_le_bytes()[..6])?;
        w.write_all(&[m.qos_channel])?;
        w.write_all(&[(m.fragment_number & 0x0f) | if m.more_fragments { 0x80 } else { 0 }])?;
        w.write_all(&m.ciphertext)?;
    }
    Ok(())
}

pub fn read_capture<R: Read>(mut r: R) -> Result<Vec<CaptureRecord>, CaptureError> {
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    if data.len() < 5 || &data[..4] != CAPTURE_MAGIC || data[4] != CAPTURE_VERSION {
        return Err(CaptureError::BadHeader);
    }
    let mut at = 5;
    let mut out = Vec::new();
    while at < data.len() {
        let index = out.len();
        let bad = || CaptureError::BadRecord { index };
        let len_bytes = data.get(at..at + 4).ok_or_else(bad)?;
        let len = u32::from_le_bytes([len_bytes[0], len_bytes[1], len_bytes[2], len_bytes[3]]) as usize;
        at += 4;
        let rec = data.get(at..at + len).ok_or_else(bad)?;
        if len < RECORD_FIXED {
            return Err(bad());
        }
        let direction = Direction::from_u8(rec[0]).ok_or_else(bad)?;
        let mut tsc = [0u8; 8];
        tsc[..6].copy_from_slice(&rec[1..7]);
        let frag = rec[8];
        let mpdu = Mpdu::new(
            u64::from_le_bytes(tsc),
            rec[7],
            frag & 0x0f,
            frag & 0x80 != 0,
            rec[RECORD_FIXED..].to_vec(),
        )
        .map_err(|_| bad())?;
        out.push(CaptureRecord { direction, mpdu });
        at += len;
    }
    Ok(out)
}

/// Annotated hex dump, 16 bytes per line.
pub fn hex_dump(direction: Direction, m: &Mpdu) -> String {
    let mut s = format!(
        "{:?} tsc={:#014x} ch={} frag={}{} len={}\n",
        direction,
        m.tsc,
        m.qos_channel,
        m.fragment_number,
        if m.more_fragments { "+" } else { "" },
        m.ciphertext.len()
    );
    for (i, line) in m.ciphertext.chunks(16).enumerate() {
        let _ = write!(s, "  {:04x}:", i * 16);
        for b in line {
            let _ = write!(s, " {b:02x}");
        }
        s.push('\n');
    }
    s
}
