//! LLC/SNAP, IPv4, ICMP echo, TCP and ARP wire codecs.
//!
//! Builders emit bit-exact network-order encodings with valid checksums;
//! parsers are bounds-checked and report the offset of the first problem.

use std::net::Ipv4Addr;

use crate::addr::MacAddr;

pub const LLC_SNAP_LEN: usize = 8;
pub const IPV4_HEADER_LEN: usize = 20;
pub const TCP_HEADER_LEN: usize = 20;
pub const ICMP_HEADER_LEN: usize = 8;
pub const ARP_LEN: usize = 28;

pub const ETHERTYPE_IPV4: u16 = 0x0800;
pub const ETHERTYPE_ARP: u16 = 0x0806;

pub const PROTO_ICMP: u8 = 1;
pub const PROTO_TCP: u8 = 6;
pub const PROTO_UDP: u8 = 17;

pub const IP_FLAG_DF: u16 = 0x4000;

pub mod tcp_flags {
    pub const FIN: u8 = 0x01;
    pub const SYN: u8 = 0x02;
    pub const RST: u8 = 0x04;
    pub const PSH: u8 = 0x08;
    pub const ACK: u8 = 0x10;
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parse error at offset {offset}: {what}")]
pub struct ParseError {
    pub offset: usize,
    pub what: &'static str,
}

fn need(bytes: &[u8], len: usize, what: &'static str) -> Result<(), ParseError> {
    if bytes.len() < len {
        Err(ParseError {
            offset: bytes.len(),
            what,
        })
    } else {
        Ok(())
    }
}

fn be16(b: &[u8], at: usize) -> u16 {
    u16::from_be_bytes([b[at], b[at + 1]])
}

fn be32(b: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn ip_at(b: &[u8], at: usize) -> Ipv4Addr {
    Ipv4Addr::new(b[at], b[at + 1], b[at + 2], b[at + 3])
}

fn ones_sum(bytes: &[u8], mut acc: u32) -> u32 {
    let mut chunks = bytes.chunks_exact(2);
    for c in &mut chunks {
        acc += u32::from(u16::from_be_bytes([c[0], c[1]]));
    }
    if let [last] = chunks.remainder() {
        acc += u32::from(*last) << 8;
    }
    acc
}

fn fold(mut acc: u32) -> u16 {
    while acc > 0xffff {
        acc = (acc & 0xffff) + (acc >> 16);
    }
    acc as u16
}

/// RFC 1071 checksum. Over data that already carries a valid checksum the
/// result is zero.
pub fn internet_checksum(bytes: &[u8]) -> u16 {
    !fold(ones_sum(bytes, 0))
}

fn pseudo_header_sum(src: Ipv4Addr, dst: Ipv4Addr, proto: u8, len: usize) -> u32 {
    let mut acc = ones_sum(&src.octets(), 0);
    acc = ones_sum(&dst.octets(), acc);
    acc += u32::from(proto);
    acc + len as u32
}

pub fn llc_snap(ethertype: u16) -> [u8; LLC_SNAP_LEN] {
    let et = ethertype.to_be_bytes();
    [0xaa, 0xaa, 0x03, 0x00, 0x00, 0x00, et[0], et[1]]
}

pub fn parse_llc_snap(bytes: &[u8]) -> Result<(u16, &[u8]), ParseError> {
    need(bytes, LLC_SNAP_LEN, "truncated LLC/SNAP header")?;
    if bytes[..6] != [0xaa, 0xaa, 0x03, 0x00, 0x00, 0x00] {
        return Err(ParseError {
            offset: 0,
            what: "not an RFC 1042 SNAP header",
        });
    }
    Ok((be16(bytes, 6), &bytes[LLC_SNAP_LEN..]))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ipv4Header {
    /// Type-of-service / DSCP byte.
    pub tos: u8,
    pub total_length: u16,
    pub id: u16,
    /// Flags and fragment offset, e.g. [`IP_FLAG_DF`].
    pub flags_frag: u16,
    pub ttl: u8,
    pub protocol: u8,
    pub checksum: u16,
    pub src: Ipv4Addr,
    pub dst: Ipv4Addr,
}

impl Ipv4Header {
    pub fn new(src: Ipv4Addr, dst: Ipv4Addr, protocol: u8, payload_len: usize) -> Self {
        Self {
            tos: 0,
            total_length: (IPV4_HEADER_LEN + payload_len) as u16,
            id: 0,
            flags_frag: 0,
            ttl: 64,
            protocol,
            checksum: 0,
            src,
            dst,
        }
    }

    /// Encode with the stored checksum field as-is.
    pub fn encode_raw(&self) -> [u8; IPV4_HEADER_LEN] {
        let mut b = [0u8; IPV4_HEADER_LEN];
        b[0] = 0x45;
        b[1] = self.tos;
        b[2..4].copy_from_slice(&self.total_length.to_be_bytes());
        b[4..6].copy_from_slice(&self.id.to_be_bytes());
        b[6..8].copy_from_slice(&self.flags_frag.to_be_bytes());
        b[8] = self.ttl;
        b[9] = self.protocol;
        b[10..12].copy_from_slice(&self.checksum.to_be_bytes());
        b[12..16].copy_from_slice(&self.src.octets());
        b[16..20].copy_from_slice(&self.dst.octets());
        b
    }

    /// Encode with a freshly computed header checksum.
    pub fn encode(&self) -> [u8; IPV4_HEADER_LEN] {
        let mut h = self.clone();
        h.checksum = 0;
        let c = internet_checksum(&h.encode_raw());
        h.checksum = c;
        h.encode_raw()
    }
}

/// Parse the fixed header without checking the declared total length against
/// the available bytes. Options are skipped.
pub fn parse_ipv4_header(bytes: &[u8]) -> Result<(Ipv4Header, usize), ParseError> {
    need(bytes, IPV4_HEADER_LEN, "truncated IPv4 header")?;
    if bytes[0] >> 4 != 4 {
        return Err(ParseError {
            offset: 0,
            what: "IP version is not 4",
        });
    }
    let ihl = usize::from(bytes[0] & 0x0f) * 4;
    if ihl < IPV4_HEADER_LEN {
        return Err(ParseError {
            offset: 0,
            what: "IHL below 5",
        });
    }
    need(bytes, ihl, "truncated IPv4 options")?;
    let h = Ipv4Header {
        tos: bytes[1],
        total_length: be16(bytes, 2),
        id: be16(bytes, 4),
        flags_frag: be16(bytes, 6),
        ttl: bytes[8],
        protocol: bytes[9],
        checksum: be16(bytes, 10),
        src: ip_at(bytes, 12),
        dst: ip_at(bytes, 16),
    };
    Ok((h, ihl))
}

/// Parse a complete IPv4 packet, returning the header and its payload.
pub fn parse_ipv4(bytes: &[u8]) -> Result<(Ipv4Header, &[u8]), ParseError> {
    let (h, ihl) = parse_ipv4_header(bytes)?;
    let total = usize::from(h.total_length);
    if total < ihl {
        return Err(ParseError {
            offset: 2,
            what: "total length shorter than header",
        });
    }
    need(bytes, total, "IPv4 packet shorter than total length")?;
    Ok((h, &bytes[ihl..total]))
}

pub fn ipv4_header_checksum_ok(bytes: &[u8]) -> bool {
    match parse_ipv4_header(bytes) {
        Ok((_, ihl)) => internet_checksum(&bytes[..ihl]) == 0,
        Err(_) => false,
    }
}

pub fn ipv4_packet(header: &Ipv4Header, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(IPV4_HEADER_LEN + payload.len());
    out.extend_from_slice(&header.encode());
    out.extend_from_slice(payload);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EchoKind {
    Request,
    Reply,
}

impl EchoKind {
    fn icmp_type(self) -> u8 {
        match self {
            EchoKind::Request => 8,
            EchoKind::Reply => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IcmpEcho {
    pub kind: EchoKind,
    pub id: u16,
    pub seq: u16,
    pub payload: Vec<u8>,
}

impl IcmpEcho {
    pub fn request(id: u16, seq: u16, payload: Vec<u8>) -> Self {
        Self {
            kind: EchoKind::Request,
            id,
            seq,
            payload,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(ICMP_HEADER_LEN + self.payload.len());
        b.extend_from_slice(&[self.kind.icmp_type(), 0, 0, 0]);
        b.extend_from_slice(&self.id.to_be_bytes());
        b.extend_from_slice(&self.seq.to_be_bytes());
        b.extend_from_slice(&self.payload);
        let c = internet_checksum(&b);
        b[2..4].copy_from_slice(&c.to_be_bytes());
        b
    }
}

pub fn parse_icmp_echo(bytes: &[u8]) -> Result<IcmpEcho, ParseError> {
    need(bytes, ICMP_HEADER_LEN, "truncated ICMP header")?;
    let kind = match (bytes[0], bytes[1]) {
        (8, 0) => EchoKind::Request,
        (0, 0) => EchoKind::Reply,
        _ => {
            return Err(ParseError {
                offset: 0,
                what: "not an ICMP echo message",
            })
        }
    };
    Ok(IcmpEcho {
        kind,
        id: be16(bytes, 4),
        seq: be16(bytes, 6),
        payload: bytes[ICMP_HEADER_LEN..].to_vec(),
    })
}

pub fn icmp_checksum_ok(bytes: &[u8]) -> bool {
    bytes.len() >= ICMP_HEADER_LEN && internet_checksum(bytes) == 0
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TcpHeader {
    pub src_port: u16,
    pub dst_port: u16,
    pub seq: u32,
    pub ack: u32,
    pub flags: u8,
    pub window: u16,
    pub checksum: u16,
    pub urgent: u16,
}

impl TcpHeader {
    pub fn new(src_port: u16, dst_port: u16, seq: u32, ack: u32, flags: u8) -> Self {
        Self {
            src_port,
            dst_port,
            seq,
            ack,
            flags,
            window: 0,
            checksum: 0,
            urgent: 0,
        }
    }

    fn encode_raw(&self) -> [u8; TCP_HEADER_LEN] {
        let mut b = [0u8; TCP_HEADER_LEN];
        b[0..2].copy_from_slice(&self.src_port.to_be_bytes());
        b[2..4].copy_from_slice(&self.dst_port.to_be_bytes());
        b[4..8].copy_from_slice(&self.seq.to_be_bytes());
        b[8..12].copy_from_slice(&self.ack.to_be_bytes());
        b[12] = 0x50;
        b[13] = self.flags;
        b[14..16].copy_from_slice(&self.window.to_be_bytes());
        b[16..18].copy_from_slice(&self.checksum.to_be_bytes());
        b[18..20].copy_from_slice(&self.urgent.to_be_bytes());
        b
    }

    /// Encode header and payload as a segment with a valid checksum.
    pub fn segment(&self, src: Ipv4Addr, dst: Ipv4Addr, payload: &[u8]) -> Vec<u8> {
        let mut h = self.clone();
        h.checksum = 0;
        let mut seg = h.encode_raw().to_vec();
        seg.extend_from_slice(payload);
        let acc = pseudo_header_sum(src, dst, PROTO_TCP, seg.len());
        let c = !fold(ones_sum(&seg, acc));
        seg[16..18].copy_from_slice(&c.to_be_bytes());
        seg
    }
}

pub fn parse_tcp(bytes: &[u8]) -> Result<(TcpHeader, &[u8]), ParseError> {
    need(bytes, TCP_HEADER_LEN, "truncated TCP header")?;
    let off = usize::from(bytes[12] >> 4) * 4;
    if off < TCP_HEADER_LEN {
        return Err(ParseError {
            offset: 12,
            what: "TCP data offset below 5",
        });
    }
    need(bytes, off, "truncated TCP options")?;
    let h = TcpHeader {
        src_port: be16(bytes, 0),
        dst_port: be16(bytes, 2),
        seq: be32(bytes, 4),
        ack: be32(bytes, 8),
        flags: bytes[13],
        window: be16(bytes, 14),
        checksum: be16(bytes, 16),
        urgent: be16(bytes, 18),
    };
    Ok((h, &bytes[off..]))
}

pub fn tcp_checksum_ok(src: Ipv4Addr, dst: Ipv4Addr, segment: &[u8]) -> bool {
    let acc = pseudo_header_sum(src, dst, PROTO_TCP, segment.len());
    fold(ones_sum(segment, acc)) == 0xffff
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArpPacket {
    /// 1 = request, 2 = reply.
    pub op: u16,
    pub sender_mac: MacAddr,
    pub sender_ip: Ipv4Addr,
    pub target_mac: MacAddr,
    pub target_ip: Ipv4Addr,
}

impl ArpPacket {
    pub fn encode(&self) -> [u8; ARP_LEN] {
        let mut b = [0u8; ARP_LEN];
        b[0..2].copy_from_slice(&1u16.to_be_bytes());
        b[2..4].copy_from_slice(&ETHERTYPE_IPV4.to_be_bytes());
        b[4] = 6;
        b[5] = 4;
        b[6..8].copy_from_slice(&self.op.to_be_bytes());
        b[8..14].copy_from_slice(&self.sender_mac.0);
        b[14..18].copy_from_slice(&self.sender_ip.octets());
        b[18..24].copy_from_slice(&self.target_mac.0);
        b[24..28].copy_from_slice(&self.target_ip.octets());
        b
    }
}

pub fn parse_arp(bytes: &[u8]) -> Result<ArpPacket, ParseError> {
    need(bytes, ARP_LEN, "truncated ARP packet")?;
    if be16(bytes, 0) != 1 || be16(bytes, 2) != ETHERTYPE_IPV4 || bytes[4] != 6 || bytes[5] != 4 {
        return Err(ParseError {
            offset: 0,
            what: "not Ethernet/IPv4 ARP",
        });
    }
    let mac = |at: usize| {
        let mut m = [0u8; 6];
        m.copy_from_slice(&bytes[at..at + 6]);
        MacAddr(m)
    };
    Ok(ArpPacket {
        op: be16(bytes, 6),
        sender_mac: mac(8),
        sender_ip: ip_at(bytes, 14),
        target_mac: mac(18),
        target_ip: ip_at(bytes, 24),
    })
}

/// LLC/SNAP ‖ IPv4 header ‖ payload.
pub fn llc_ipv4(header: &Ipv4Header, payload: &[u8]) -> Vec<u8> {
    let mut out = llc_snap(ETHERTYPE_IPV4).to_vec();
    out.extend_from_slice(&ipv4_packet(header, payload));
    out
}

pub fn llc_arp(arp: &ArpPacket) -> Vec<u8> {
    let mut out = llc_snap(ETHERTYPE_ARP).to_vec();
    out.extend_from_slice(&arp.encode());
    out
}

/// LLC/SNAP-framed ICMP echo request with a fully valid IPv4 header.
pub fn llc_icmp_echo(src: Ipv4Addr, dst: Ipv4Addr, echo: &IcmpEcho) -> Vec<u8> {
    let icmp = echo.encode();
    let ip = Ipv4Header::new(src, dst, PROTO_ICMP, icmp.len());
    llc_ipv4(&ip, &icmp)
}

/// LLC/SNAP-framed TCP segment.
pub fn llc_tcp(ip: &Ipv4Header, tcp: &TcpHeader, payload: &[u8]) -> Vec<u8> {
    let seg = tcp.segment(ip.src, ip.dst, payload);
    let mut ip = ip.clone();
    ip.protocol = PROTO_TCP;
    ip.total_length = (IPV4_HEADER_LEN + seg.len()) as u16;
    llc_ipv4(&ip, &seg)
}
