//! Deterministic virtual-clock simulation of a TKIP network: a victim
//! client, its access point, a WAN uplink and an attacker with a radio and
//! a host on the WAN.
//!
//! The attacker drives the clock through [`Attacker`], which only exposes
//! what a real attacker would have: frames on the air, MIC failure reports,
//! countermeasure shutdowns, and packets delivered to its WAN host.
//!
//! Every transmitted fragment burst is delivered atomically. Frames do not
//! collide and nothing is lost.

pub mod audit;
pub mod scenario;
pub mod transcript;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::net::Ipv4Addr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use audit::{Accepted, Audit, KeyEpoch, SentFrame};
pub use scenario::{AttackKind, Scenario, ScenarioError};
pub use transcript::{Event, Line, Transcript};

use crate::addr::{Direction, MacAddr};
use crate::frames::packet::{
    icmp_checksum_ok, internet_checksum, ipv4_header_checksum_ok, llc_arp, llc_ipv4, llc_tcp, parse_arp,
    parse_icmp_echo, parse_ipv4_header, parse_llc_snap, parse_tcp, tcp_checksum_ok, tcp_flags, ArpPacket, EchoKind,
    IcmpEcho, Ipv4Header, TcpHeader, ETHERTYPE_ARP, ETHERTYPE_IPV4, IP_FLAG_DF, PROTO_ICMP, PROTO_TCP, PROTO_UDP,
};
use crate::frames::{open, seal, LinkKeys, MichaelCtr, Mpdu, Msdu, ReplayState, RxOutcome, TemporalKey};
use crate::michael::{MicHeader, MicKey};

/// Virtual time in microseconds.
pub type Micros = u64;
pub const MS: Micros = 1_000;
pub const SECOND: Micros = 1_000_000;
/// Two MIC failures closer than this shut the link down.
pub const COUNTERMEASURE_WINDOW: Micros = 60 * SECOND;
pub const SHUTDOWN: Micros = 60 * SECOND;

/// One MSDU worth of fragments as sent over the air.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AirFrame {
    pub direction: Direction,
    pub da: MacAddr,
    pub sa: MacAddr,
    pub mpdus: Vec<Mpdu>,
}

impl AirFrame {
    pub fn len(&self) -> usize {
        self.mpdus.iter().map(|m| m.ciphertext.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.mpdus.is_empty()
    }

    fn airtime(&self) -> Micros {
        // 54 Mbit/s plus per-fragment overhead.
        self.mpdus
            .iter()
            .map(|m| 50 + (m.ciphertext.len() as u64 * 8).div_ceil(54))
            .sum()
    }
}

/// Everything the attacker can observe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Observation {
    Air { at: Micros, frame: AirFrame },
    MicFailureReport { at: Micros, from: MacAddr },
    Countermeasures { at: Micros },
    /// An IPv4 packet delivered to the attacker's WAN host.
    Wan { at: Micros, packet: Vec<u8> },
}

#[derive(Debug)]
enum Ev {
    ToClient { frame: AirFrame, injected: bool },
    ToAp(AirFrame),
    WanToAp(Vec<u8>),
    WanToHost(Vec<u8>),
    TrafficIpv4,
    TrafficArp,
    Rekey,
}

#[derive(Debug)]
struct Scheduled {
    at: Micros,
    seq: u64,
    ev: Ev,
}

impl PartialEq for Scheduled {
    fn eq(&self, o: &Self) -> bool {
        (self.at, self.seq) == (o.at, o.seq)
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Scheduled {
    // Min-heap on (time, insertion order).
    fn cmp(&self, o: &Self) -> Ordering {
        (o.at, o.seq).cmp(&(self.at, self.seq))
    }
}

pub struct Sim {
    sc: Scenario,
    now: Micros,
    seq: u64,
    queue: BinaryHeap<Scheduled>,
    rng: ChaCha8Rng,
    oracle: MichaelCtr,

    client_rx: ReplayState,
    ap_rx: ReplayState,
    ap_tsc: u64,
    client_tsc: u64,
    last_mic_failure: Option<Micros>,
    shutdown_until: Micros,
    wan_up_free: Micros,
    wan_down_free: Micros,

    inbox: Vec<Observation>,
    transcript: Transcript,
    audit: Audit,
}

impl Sim {
    pub fn new(sc: Scenario) -> Result<Self, ScenarioError> {
        sc.validate()?;
        let mut sim = Sim {
            rng: ChaCha8Rng::seed_from_u64(sc.seed),
            client_rx: ReplayState::new(sc.qos),
            ap_rx: ReplayState::new(sc.qos),
            sc,
            now: 0,
            seq: 0,
            queue: BinaryHeap::new(),
            oracle: MichaelCtr,
            ap_tsc: 1,
            client_tsc: 1,
            last_mic_failure: None,
            shutdown_until: 0,
            wan_up_free: 0,
            wan_down_free: 0,
            inbox: Vec::new(),
            transcript: Transcript::default(),
            audit: Audit::default(),
        };
        sim.new_keys();
        if sim.sc.traffic_ipv4_interval_ms > 0 {
            let first = sim.rng.gen_range(0..sim.sc.traffic_ipv4_interval_ms * MS);
            sim.schedule(first, Ev::TrafficIpv4);
        }
        if sim.sc.traffic_arp_interval_ms > 0 {
            let first = sim.rng.gen_range(0..sim.sc.traffic_arp_interval_ms * MS);
            sim.schedule(first, Ev::TrafficArp);
        }
        if sim.sc.rekey_interval_s > 0 {
            sim.schedule(sim.sc.rekey_interval_s * SECOND, Ev::Rekey);
        }
        Ok(sim)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.sc
    }

    pub fn now(&self) -> Micros {
        self.now
    }

    pub fn audit(&self) -> &Audit {
        &self.audit
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn into_parts(self) -> (Transcript, Audit) {
        (self.transcript, self.audit)
    }

    pub fn attacker(&mut self) -> Attacker<'_> {
        Attacker { sim: self }
    }

    fn schedule(&mut self, at: Micros, ev: Ev) {
        self.seq += 1;
        self.queue.push(Scheduled { at, seq: self.seq, ev });
    }

    fn run_until(&mut self, t: Micros) {
        while self.queue.peek().is_some_and(|s| s.at <= t) {
            let s = self.queue.pop().expect("peeked");
            self.now = self.now.max(s.at);
            self.handle(s.ev);
        }
        self.now = self.now.max(t);
    }

    fn handle(&mut self, ev: Ev) {
        match ev {
            Ev::ToClient { frame, injected } => self.client_rx(frame, injected),
            Ev::ToAp(frame) => self.ap_rx(frame),
            Ev::WanToAp(p) => self.ap_from_wan(p),
            Ev::WanToHost(p) => {
                self.transcript.push(self.now, Event::WanRx { len: p.len() });
                self.inbox.push(Observation::Wan { at: self.now, packet: p });
            }
            Ev::TrafficIpv4 => {
                self.background_ipv4();
                let next = self.now + self.sc.traffic_ipv4_interval_ms * MS;
                self.schedule(next, Ev::TrafficIpv4);
            }
            Ev::TrafficArp => {
                self.background_arp();
                let next = self.now + self.sc.traffic_arp_interval_ms * MS;
                self.schedule(next, Ev::TrafficArp);
            }
            Ev::Rekey => {
                self.new_keys();
                let next = self.now + self.sc.rekey_interval_s * SECOND;
                self.schedule(next, Ev::Rekey);
            }
        }
    }

    fn new_keys(&mut self) {
        let mut link = |dir| LinkKeys {
            tk: TemporalKey(self.rng.gen()),
            mic: MicKey::new(self.rng.gen(), self.rng.gen(), dir),
        };
        let down = link(Direction::ApToClient);
        let up = link(Direction::ClientToAp);
        self.audit.epochs.push(KeyEpoch {
            start: self.now,
            down,
            up,
        });
        self.client_rx.reset();
        self.ap_rx.reset();
        self.ap_tsc = 1;
        self.client_tsc = 1;
        let epoch = self.audit.epochs.len() - 1;
        if epoch > 0 {
            self.transcript.push(self.now, Event::Rekey { epoch });
        }
    }

    fn keys(&self) -> &KeyEpoch {
        self.audit.current()
    }

    fn shut_down(&self) -> bool {
        self.now < self.shutdown_until
    }

    fn transmit(&mut self, frame: AirFrame) {
        for m in &frame.mpdus {
            self.transcript.push(
                self.now,
                Event::Air {
                    direction: frame.direction,
                    tsc: m.tsc,
                    channel: m.qos_channel,
                    len: m.ciphertext.len(),
                },
            );
        }
        let at = self.now + frame.airtime();
        self.inbox.push(Observation::Air {
            at: self.now,
            frame: frame.clone(),
        });
        match frame.direction {
            Direction::ApToClient => self.schedule(at, Ev::ToClient { frame, injected: false }),
            Direction::ClientToAp => self.schedule(at, Ev::ToAp(frame)),
        }
    }

    /// Seal and send one MSDU from the AP or the client.
    fn send(&mut self, direction: Direction, body: Vec<u8>, channel: u8) {
        if self.shut_down() {
            return;
        }
        let (da, sa) = match direction {
            Direction::ApToClient => (self.sc.client_mac, self.sc.ap_mac),
            Direction::ClientToAp => (self.sc.ap_mac, self.sc.client_mac),
        };
        let prio = if self.sc.qos { channel } else { 0 };
        let header = MicHeader::new(da, sa, prio).expect("channel below 8");
        let keys = *self.keys().keys(direction);
        let tsc = match direction {
            Direction::ApToClient => &mut self.ap_tsc,
            Direction::ClientToAp => &mut self.client_tsc,
        };
        let t = *tsc;
        *tsc += 1;
        let msdu = Msdu::new(header, body);
        let mpdu = seal(&msdu, &keys, &self.oracle, t, channel).expect("simulated MSDUs fit");
        let mic = crate::michael::mic_compute(&keys.mic, &header, &msdu.body).expect("fits");
        self.audit.sent.push(SentFrame {
            at: self.now,
            epoch: self.audit.epochs.len() - 1,
            direction,
            channel,
            tsc: t,
            header,
            body: msdu.body,
            mic,
        });
        self.transmit(AirFrame {
            direction,
            da,
            sa,
            mpdus: vec![mpdu],
        });
    }

    fn client_rx(&mut self, frame: AirFrame, injected: bool) {
        if frame.da != self.sc.client_mac || self.shut_down() {
            if injected {
                self.rx_note("dropped");
            }
            return;
        }
        let keys = self.keys().down;
        let out = open(&frame.mpdus, frame.da, frame.sa, &keys, &self.oracle, &mut self.client_rx);
        if injected {
            let s = match &out {
                RxOutcome::Ok(_) => "ok",
                RxOutcome::IcvFailure => "icv_failure",
                RxOutcome::MicFailure { .. } => "mic_failure",
                RxOutcome::ReplayDrop => "replay_drop",
                RxOutcome::Malformed => "malformed",
            };
            self.rx_note(s);
        }
        match out {
            RxOutcome::Ok(msdu) => {
                self.audit.accepted.push(Accepted {
                    at: self.now,
                    injected,
                    channel: frame.mpdus[0].qos_channel,
                    body: msdu.body.clone(),
                });
                self.client_stack(&msdu.body);
            }
            RxOutcome::MicFailure { .. } => self.mic_failure(),
            _ => {}
        }
    }

    fn rx_note(&mut self, outcome: &str) {
        self.transcript.push(
            self.now,
            Event::Rx {
                outcome: outcome.to_string(),
            },
        );
    }

    fn mic_failure(&mut self) {
        let now = self.now;
        self.audit.mic_failures.push(now);
        self.transcript.push(now, Event::Report);
        self.inbox.push(Observation::MicFailureReport {
            at: now,
            from: self.sc.client_mac,
        });
        if self.last_mic_failure.is_some_and(|p| now - p < COUNTERMEASURE_WINDOW) {
            self.shutdown_until = now + SHUTDOWN;
            self.audit.countermeasures.push(now);
            self.transcript.push(
                now,
                Event::Countermeasures {
                    until_us: self.shutdown_until,
                },
            );
            self.inbox.push(Observation::Countermeasures { at: now });
            self.new_keys();
        }
        self.last_mic_failure = Some(now);
    }

    fn ip_header(&mut self, src: Ipv4Addr, dst: Ipv4Addr, protocol: u8, payload_len: usize) -> Ipv4Header {
        Ipv4Header {
            id: self.rng.gen(),
            flags_frag: IP_FLAG_DF,
            ..Ipv4Header::new(src, dst, protocol, payload_len)
        }
    }

    /// The victim's network stack.
    fn client_stack(&mut self, body: &[u8]) {
        let Ok((ethertype, rest)) = parse_llc_snap(body) else { return };
        match ethertype {
            ETHERTYPE_ARP => {
                let Ok(arp) = parse_arp(rest) else { return };
                if arp.op == 1 && arp.target_ip == self.sc.client_ip {
                    let reply = ArpPacket {
                        op: 2,
                        sender_mac: self.sc.client_mac,
                        sender_ip: self.sc.client_ip,
                        target_mac: arp.sender_mac,
                        target_ip: arp.sender_ip,
                    };
                    self.send(Direction::ClientToAp, llc_arp(&reply), 0);
                }
            }
            ETHERTYPE_IPV4 => self.client_ipv4(rest),
            _ => {}
        }
    }

    fn client_ipv4(&mut self, ip: &[u8]) {
        let Ok((h, ihl)) = parse_ipv4_header(ip) else { return };
        let total = usize::from(h.total_length);
        if !ipv4_header_checksum_ok(ip) || h.dst != self.sc.client_ip || total < ihl || total > ip.len() {
            return;
        }
        let payload = &ip[ihl..total];
        match h.protocol {
            // The echo checksum is not checked: it may cover bytes the
            // sender never saw in the clear.
            PROTO_ICMP if self.sc.client_icmp_echo => {
                let Ok(req) = parse_icmp_echo(payload) else { return };
                if req.kind != EchoKind::Request {
                    return;
                }
                let reply = IcmpEcho {
                    kind: EchoKind::Reply,
                    ..req
                }
                .encode();
                debug_assert!(icmp_checksum_ok(&reply));
                let iph = self.ip_header(self.sc.client_ip, h.src, PROTO_ICMP, reply.len());
                self.send(Direction::ClientToAp, llc_ipv4(&iph, &reply), 0);
            }
            PROTO_TCP => {
                if !tcp_checksum_ok(h.src, h.dst, payload) {
                    return;
                }
                let Ok((t, _)) = parse_tcp(payload) else { return };
                if t.flags & (tcp_flags::SYN | tcp_flags::ACK | tcp_flags::RST) != tcp_flags::SYN {
                    return;
                }
                let resp = if self.sc.client_tcp_open.contains(&t.dst_port) {
                    TcpHeader {
                        window: 29200,
                        ..TcpHeader::new(
                            t.dst_port,
                            t.src_port,
                            self.rng.gen(),
                            t.seq.wrapping_add(1),
                            tcp_flags::SYN | tcp_flags::ACK,
                        )
                    }
                } else {
                    TcpHeader::new(t.dst_port, t.src_port, 0, t.seq.wrapping_add(1), tcp_flags::RST | tcp_flags::ACK)
                };
                let iph = self.ip_header(self.sc.client_ip, h.src, PROTO_TCP, 20);
                self.send(Direction::ClientToAp, llc_tcp(&iph, &resp, &[]), 0);
            }
            _ => {}
        }
    }

    fn ap_rx(&mut self, frame: AirFrame) {
        if frame.da != self.sc.ap_mac || self.shut_down() {
            return;
        }
        let keys = self.keys().up;
        let RxOutcome::Ok(msdu) = open(&frame.mpdus, frame.da, frame.sa, &keys, &self.oracle, &mut self.ap_rx) else {
            return;
        };
        let Ok((ETHERTYPE_IPV4, ip)) = parse_llc_snap(&msdu.body) else { return };
        let Ok((h, ihl)) = parse_ipv4_header(ip) else { return };
        let total = usize::from(h.total_length);
        if total < ihl || total > ip.len() {
            return;
        }
        let ip = &ip[..total];
        if h.dst == self.sc.ap_ip {
            if h.protocol == PROTO_TCP {
                self.ap_tcp(&h, &ip[ihl..]);
            }
        } else if h.dst != self.sc.client_ip {
            self.ap_to_wan(ip.to_vec());
        }
    }

    /// The AP has no connections: any non-reset segment gets a reset.
    fn ap_tcp(&mut self, h: &Ipv4Header, seg: &[u8]) {
        let Ok((t, data)) = parse_tcp(seg) else { return };
        if t.flags & tcp_flags::RST != 0 {
            return;
        }
        let rst = if t.flags & tcp_flags::ACK != 0 {
            TcpHeader::new(t.dst_port, t.src_port, t.ack, 0, tcp_flags::RST)
        } else {
            let len = data.len() as u32 + u32::from(t.flags & (tcp_flags::SYN | tcp_flags::FIN) != 0);
            TcpHeader::new(t.dst_port, t.src_port, 0, t.seq.wrapping_add(len), tcp_flags::RST | tcp_flags::ACK)
        };
        let iph = if self.sc.ap_linux_rst {
            Ipv4Header {
                flags_frag: IP_FLAG_DF,
                ..Ipv4Header::new(self.sc.ap_ip, h.src, PROTO_TCP, 20)
            }
        } else {
            Ipv4Header {
                id: self.rng.gen(),
                ..Ipv4Header::new(self.sc.ap_ip, h.src, PROTO_TCP, 20)
            }
        };
        self.send(Direction::ApToClient, llc_tcp(&iph, &rst, &[]), 0);
    }

    fn wan_delay(&self, len: usize) -> Micros {
        (len as u64 * 8 * 1000).div_ceil(self.sc.wan_rate_kbps)
    }

    /// Apply the WAN hop count; `None` when the TTL runs out.
    fn hop(&self, mut packet: Vec<u8>) -> Option<Vec<u8>> {
        let (_, ihl) = parse_ipv4_header(&packet).ok()?;
        let ttl = packet[8].checked_sub(self.sc.wan_hops).filter(|&t| t > 0)?;
        packet[8] = ttl;
        packet[10..12].fill(0);
        let c = internet_checksum(&packet[..ihl]);
        packet[10..12].copy_from_slice(&c.to_be_bytes());
        Some(packet)
    }

    fn ap_to_wan(&mut self, packet: Vec<u8>) {
        let Some(packet) = self.hop(packet) else { return };
        let dst = Ipv4Addr::new(packet[16], packet[17], packet[18], packet[19]);
        let start = self.now.max(self.wan_up_free);
        self.wan_up_free = start + self.wan_delay(packet.len());
        if Some(dst) == self.sc.wan_host {
            let at = self.wan_up_free + self.sc.wan_latency_ms * MS;
            self.schedule(at, Ev::WanToHost(packet));
        }
    }

    fn ap_from_wan(&mut self, packet: Vec<u8>) {
        let Some(packet) = self.hop(packet) else { return };
        if packet[16..20] == self.sc.client_ip.octets() {
            let mut body = crate::frames::packet::llc_snap(ETHERTYPE_IPV4).to_vec();
            body.extend_from_slice(&packet);
            self.send(Direction::ApToClient, body, 0);
        }
    }

    fn background_ipv4(&mut self) {
        let len = self.rng.gen_range(self.sc.traffic_ipv4_len.clone());
        // LLC ‖ IPv4 ‖ UDP ‖ data, `len` bytes in total.
        let data_len = len.saturating_sub(8 + 20 + 8);
        let mut udp = Vec::with_capacity(8 + data_len);
        udp.extend_from_slice(&443u16.to_be_bytes());
        udp.extend_from_slice(&self.rng.gen_range(32768u16..61000).to_be_bytes());
        udp.extend_from_slice(&((8 + data_len) as u16).to_be_bytes());
        udp.extend_from_slice(&[0, 0]);
        udp.extend((0..data_len).map(|_| self.rng.gen::<u8>()));
        let tos = if self.rng.gen_bool(self.sc.traffic_dscp_c0_ratio) { 0xc0 } else { 0 };
        let ttl = 64 - self.sc.wan_hops.min(63);
        let h = Ipv4Header {
            tos,
            ttl,
            ..self.ip_header(self.sc.traffic_server, self.sc.client_ip, PROTO_UDP, udp.len())
        };
        self.send(Direction::ApToClient, llc_ipv4(&h, &udp), 0);
    }

    fn background_arp(&mut self) {
        let req = ArpPacket {
            op: 1,
            sender_mac: self.sc.ap_mac,
            sender_ip: self.sc.ap_ip,
            target_mac: MacAddr::ZERO,
            target_ip: self.sc.client_ip,
        };
        self.send(Direction::ApToClient, llc_arp(&req), 0);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no route to a WAN host")]
pub struct NoWanRoute;

/// The attacker's interface to a running simulation.
pub struct Attacker<'a> {
    sim: &'a mut Sim,
}

impl Attacker<'_> {
    pub fn now(&self) -> Micros {
        self.sim.now
    }

    /// Address of the attacker's WAN host, if the scenario has one.
    pub fn wan_address(&self) -> Option<Ipv4Addr> {
        self.sim.sc.wan_host
    }

    /// Put a forged frame on the air.
    pub fn inject(&mut self, frame: AirFrame) {
        let sim = &mut *self.sim;
        sim.transcript.push(
            sim.now,
            Event::Inject {
                first_tsc: frame.mpdus.first().map_or(0, |m| m.tsc),
                channel: frame.mpdus.first().map_or(0, |m| m.qos_channel),
                fragments: frame.mpdus.len(),
                len: frame.len(),
            },
        );
        let at = sim.now + frame.airtime();
        match frame.direction {
            Direction::ApToClient => sim.schedule(at, Ev::ToClient { frame, injected: true }),
            Direction::ClientToAp => sim.schedule(at, Ev::ToAp(frame)),
        }
    }

    /// Send an IPv4 packet from the WAN host toward the wireless network.
    pub fn wan_send(&mut self, packet: Vec<u8>) -> Result<(), NoWanRoute> {
        let sim = &mut *self.sim;
        if sim.sc.wan_host.is_none() {
            return Err(NoWanRoute);
        }
        sim.transcript.push(sim.now, Event::WanTx { len: packet.len() });
        let start = sim.now.max(sim.wan_down_free);
        sim.wan_down_free = start + sim.wan_delay(packet.len());
        let at = sim.wan_down_free + sim.sc.wan_latency_ms * MS;
        sim.schedule(at, Ev::WanToAp(packet));
        Ok(())
    }

    /// Advance the clock by `d`.
    pub fn wait(&mut self, d: Micros) {
        let t = self.sim.now + d;
        self.sim.run_until(t);
    }

    pub fn wait_until(&mut self, t: Micros) {
        self.sim.run_until(t);
    }

    /// Run until `pred` matches a new observation or `timeout` passes.
    /// Everything observed meanwhile stays in the inbox.
    pub fn wait_for(&mut self, timeout: Micros, mut pred: impl FnMut(&Observation) -> bool) -> bool {
        let deadline = self.sim.now + timeout;
        let mut seen = self.sim.inbox.len();
        loop {
            if self.sim.inbox[seen..].iter().any(&mut pred) {
                return true;
            }
            seen = self.sim.inbox.len();
            match self.sim.queue.peek() {
                Some(s) if s.at <= deadline => {
                    let s = self.sim.queue.pop().expect("peeked");
                    self.sim.now = self.sim.now.max(s.at);
                    self.sim.handle(s.ev);
                }
                _ => {
                    self.sim.now = self.sim.now.max(deadline);
                    return false;
                }
            }
        }
    }

    /// Take everything observed so far.
    pub fn poll(&mut self) -> Vec<Observation> {
        std::mem::take(&mut self.sim.inbox)
    }

    pub fn note(&mut self, attack: &str, what: impl Into<String>, hex: Option<String>) {
        let now = self.sim.now;
        self.sim.transcript.push(
            now,
            Event::Note {
                attack: attack.to_string(),
                what: what.into(),
                hex,
            },
        );
    }
}

/// Outcome of [`run`].
pub struct SimRun<R> {
    pub result: R,
    pub transcript: Transcript,
    pub audit: Audit,
}

/// Execute an attacker program against a fresh simulation.
pub fn run<R>(scenario: &Scenario, program: impl FnOnce(&mut Attacker<'_>) -> R) -> Result<SimRun<R>, ScenarioError> {
    let mut sim = Sim::new(scenario.clone())?;
    let result = program(&mut sim.attacker());
    let (transcript, audit) = sim.into_parts();
    Ok(SimRun {
        result,
        transcript,
        audit,
    })
}
