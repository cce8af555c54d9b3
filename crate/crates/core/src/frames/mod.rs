//! TKIP data frames: MSDU/MPDU model, sealing and opening, fragmentation.
//!
//! An MSDU body carries the 8-byte MIC at its end, so after fragmentation the
//! MIC lands in the final fragment. Every fragment carries its own ICV and is
//! encrypted with the keystream for its own TSC.

pub mod capture;
mod icv;
mod oracle;
pub mod packet;

use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use icv::{icv, icv_ok, last_icv_byte, truncation_mask, CRC32_RESIDUE, CRC_TABLE};
pub use oracle::{KeystreamOracle, MichaelCtr, TemporalKey};

use crate::addr::MacAddr;
use crate::michael::{mic_compute, Mic, MicHeader, MicKey, MichaelError};

pub const ICV_LEN: usize = 4;
pub const MIC_LEN: usize = 8;
pub const MAX_FRAGMENTS: usize = 16;
pub const QOS_CHANNELS: usize = 8;
pub const TSC_MASK: u64 = (1 << 48) - 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrameError {
    #[error("fragment number {0} exceeds 15")]
    FragmentNumber(u8),
    #[error("QoS channel {0} exceeds 7")]
    Channel(u8),
    #[error("ciphertext of {0} bytes is shorter than 5")]
    TooShort(usize),
    #[error("TSC {0:#x} exceeds 48 bits")]
    Tsc(u64),
    #[error("need {needed} bytes of keystream capacity, have {available}")]
    InsufficientKeystream { needed: usize, available: usize },
    #[error("{0} fragments needed, at most 16 allowed")]
    TooManyFragments(usize),
    #[error("keystream of {keystream} bytes cannot cover {needed} bytes")]
    ShortKeystream { keystream: usize, needed: usize },
    #[error(transparent)]
    Michael(#[from] MichaelError),
}

/// Plaintext MAC service data unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Msdu {
    pub header: MicHeader,
    /// LLC ‖ network payload.
    pub body: Vec<u8>,
    pub mic: Option<Mic>,
}

impl Msdu {
    pub fn new(header: MicHeader, body: Vec<u8>) -> Self {
        Self {
            header,
            body,
            mic: None,
        }
    }
}

/// One encrypted fragment as it appears on the air.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mpdu {
    pub tsc: u64,
    pub qos_channel: u8,
    pub fragment_number: u8,
    pub more_fragments: bool,
    /// Encrypted fragment body ‖ ICV.
    pub ciphertext: Vec<u8>,
}

impl Mpdu {
    pub fn new(
        tsc: u64,
        qos_channel: u8,
        fragment_number: u8,
        more_fragments: bool,
        ciphertext: Vec<u8>,
    ) -> Result<Self, FrameError> {
        let m = Self {
            tsc,
            qos_channel,
            fragment_number,
            more_fragments,
            ciphertext,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), FrameError> {
        if self.tsc > TSC_MASK {
            return Err(FrameError::Tsc(self.tsc));
        }
        if usize::from(self.qos_channel) >= QOS_CHANNELS {
            return Err(FrameError::Channel(self.qos_channel));
        }
        if usize::from(self.fragment_number) >= MAX_FRAGMENTS {
            return Err(FrameError::FragmentNumber(self.fragment_number));
        }
        if self.ciphertext.len() < ICV_LEN + 1 {
            return Err(FrameError::TooShort(self.ciphertext.len()));
        }
        Ok(())
    }

    /// Relabel as fragment `number` on `channel`; ciphertext is untouched.
    pub fn relabeled(&self, channel: u8, number: u8, more: bool) -> Result<Self, FrameError> {
        Mpdu::new(self.tsc, channel, number, more, self.ciphertext.clone())
    }
}

/// Keys for one direction of a TKIP association.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkKeys {
    pub tk: TemporalKey,
    pub mic: MicKey,
}

/// Per-channel replay counters of a receiver.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReplayState {
    /// When QoS is off every frame is checked against counter 0.
    pub qos: bool,
    counters: [u64; QOS_CHANNELS],
}

impl ReplayState {
    pub fn new(qos: bool) -> Self {
        Self {
            qos,
            counters: [0; QOS_CHANNELS],
        }
    }

    fn slot(&self, channel: u8) -> usize {
        if self.qos {
            usize::from(channel) % QOS_CHANNELS
        } else {
            0
        }
    }

    pub fn counter(&self, channel: u8) -> u64 {
        self.counters[self.slot(channel)]
    }

    pub fn accepts(&self, channel: u8, tsc: u64) -> bool {
        tsc > self.counter(channel)
    }

    pub fn advance(&mut self, channel: u8, tsc: u64) {
        let s = self.slot(channel);
        self.counters[s] = self.counters[s].max(tsc);
    }

    pub fn reset(&mut self) {
        self.counters = [0; QOS_CHANNELS];
    }

    /// Priority the receiver puts into the MIC header for a frame on `channel`.
    pub fn mic_priority(&self, channel: u8) -> u8 {
        if self.qos {
            channel
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RxOutcome {
    Ok(Msdu),
    /// A fragment failed its ICV; dropped without notice.
    IcvFailure,
    /// ICVs fine, MIC wrong. The receiver reports this.
    MicFailure { header: MicHeader },
    ReplayDrop,
    /// Broken fragment chain or a body too short to hold a MIC.
    Malformed,
}

fn xor_into(data: &mut [u8], keystream: &[u8]) {
    for (d, k) in data.iter_mut().zip(keystream) {
        *d ^= k;
    }
}

/// Encrypt one fragment body with a known keystream: `(plain ‖ ICV) ^ ks`.
pub fn encrypt_fragment(plain: &[u8], keystream: &[u8]) -> Result<Vec<u8>, FrameError> {
    let needed = plain.len() + ICV_LEN;
    if keystream.len() < needed {
        return Err(FrameError::ShortKeystream {
            keystream: keystream.len(),
            needed,
        });
    }
    let mut out = plain.to_vec();
    out.extend_from_slice(&icv(plain));
    xor_into(&mut out, keystream);
    Ok(out)
}

/// Transmit path: MIC, ICV and encryption for an unfragmented MSDU.
pub fn seal(
    msdu: &Msdu,
    keys: &LinkKeys,
    oracle: &dyn KeystreamOracle,
    tsc: u64,
    channel: u8,
) -> Result<Mpdu, FrameError> {
    let mut v = seal_fragmented(msdu, keys, oracle, tsc, channel, &[usize::MAX])?;
    Ok(v.remove(0))
}

/// Transmit path with explicit fragment sizes; fragment `i` uses TSC
/// `first_tsc + i`. The last size absorbs whatever remains.
pub fn seal_fragmented(
    msdu: &Msdu,
    keys: &LinkKeys,
    oracle: &dyn KeystreamOracle,
    first_tsc: u64,
    channel: u8,
    sizes: &[usize],
) -> Result<Vec<Mpdu>, FrameError> {
    let mic = mic_compute(&keys.mic, &msdu.header, &msdu.body)?;
    let mut plain = msdu.body.clone();
    plain.extend_from_slice(&mic);

    let mut out = Vec::new();
    let mut at = 0;
    for (i, &size) in sizes.iter().enumerate() {
        if i >= MAX_FRAGMENTS {
            return Err(FrameError::TooManyFragments(sizes.len()));
        }
        let last = i + 1 == sizes.len();
        let end = if last { plain.len() } else { (at + size).min(plain.len()) };
        let tsc = first_tsc + i as u64;
        let piece = &plain[at..end];
        let ks = oracle.keystream(&keys.tk, tsc, piece.len() + ICV_LEN);
        let ct = encrypt_fragment(piece, &ks)?;
        out.push(Mpdu::new(tsc, channel, i as u8, !last, ct)?);
        at = end;
    }
    Ok(out)
}

/// Receive path: per-fragment ICV, replay check, reassembly, MIC.
///
/// Counters only advance when the MSDU is accepted.
pub fn open(
    mpdus: &[Mpdu],
    da: MacAddr,
    sa: MacAddr,
    keys: &LinkKeys,
    oracle: &dyn KeystreamOracle,
    replay: &mut ReplayState,
) -> RxOutcome {
    if mpdus.is_empty() || mpdus.len() > MAX_FRAGMENTS {
        return RxOutcome::Malformed;
    }
    let channel = mpdus[0].qos_channel;
    for (i, m) in mpdus.iter().enumerate() {
        let last = i + 1 == mpdus.len();
        if m.validate().is_err()
            || usize::from(m.fragment_number) != i
            || m.more_fragments == last
            || m.qos_channel != channel
            || (i > 0 && m.tsc <= mpdus[i - 1].tsc)
        {
            return RxOutcome::Malformed;
        }
    }

    let mut body = Vec::new();
    for m in mpdus {
        let mut pt = m.ciphertext.clone();
        let ks = oracle.keystream(&keys.tk, m.tsc, pt.len());
        xor_into(&mut pt, &ks);
        if !icv_ok(&pt) {
            return RxOutcome::IcvFailure;
        }
        pt.truncate(pt.len() - ICV_LEN);
        body.extend_from_slice(&pt);
    }

    if mpdus.iter().any(|m| !replay.accepts(channel, m.tsc)) {
        return RxOutcome::ReplayDrop;
    }
    if body.len() < MIC_LEN {
        return RxOutcome::Malformed;
    }

    let header = match MicHeader::new(da, sa, replay.mic_priority(channel)) {
        Ok(h) => h,
        Err(_) => return RxOutcome::Malformed,
    };
    let split = body.len() - MIC_LEN;
    let mut mic = [0u8; MIC_LEN];
    mic.copy_from_slice(&body[split..]);
    body.truncate(split);
    match mic_compute(&keys.mic, &header, &body) {
        Ok(expected) if expected == mic => {
            replay.advance(channel, mpdus[mpdus.len() - 1].tsc);
            RxOutcome::Ok(Msdu {
                header,
                body,
                mic: Some(mic),
            })
        }
        _ => RxOutcome::MicFailure { header },
    }
}

/// Placement of MSDU bytes onto keystream slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FragmentSlot {
    pub tsc: u64,
    pub range: Range<usize>,
}

/// Greedy assignment of `len` plaintext bytes to keystream slots, ascending
/// by TSC. Each slot `(tsc, keystream_len)` carries `keystream_len - 4`
/// bytes; the ICV takes the rest.
pub fn fragment_plan(len: usize, slots: &[(u64, usize)]) -> Result<Vec<FragmentSlot>, FrameError> {
    let mut sorted: Vec<(u64, usize)> = slots
        .iter()
        .copied()
        .filter(|&(_, l)| l > ICV_LEN)
        .collect();
    sorted.sort_unstable();
    let mut plan = Vec::new();
    let mut at = 0;
    for &(tsc, l) in &sorted {
        if at >= len {
            break;
        }
        let take = (l - ICV_LEN).min(len - at);
        plan.push(FragmentSlot {
            tsc,
            range: at..at + take,
        });
        at += take;
    }
    if at < len {
        return Err(FrameError::InsufficientKeystream {
            needed: len,
            available: at,
        });
    }
    if plan.len() > MAX_FRAGMENTS {
        return Err(FrameError::TooManyFragments(plan.len()));
    }
    Ok(plan)
}

/// Plaintext capacity of up to 16 slots.
pub fn plan_capacity(slot_lens: &[usize]) -> usize {
    let mut lens: Vec<usize> = slot_lens.iter().copied().filter(|&l| l > ICV_LEN).collect();
    lens.sort_unstable_by(|a, b| b.cmp(a));
    lens.iter().take(MAX_FRAGMENTS).map(|l| l - ICV_LEN).sum()
}
