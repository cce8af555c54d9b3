//! Functionally equivalent insert packets with distinct Michael states.
//!
//! The template is the inserted prefix (LLC ‖ IPv4 header ‖ ICMP header ‖
//! padding). Sweeping the IP id, or the ICMP id and sequence number, changes
//! a couple of words in the middle; everything before them is absorbed once.

use serde::{Deserialize, Serialize};

use super::CollisionError;
use crate::frames::packet::{internet_checksum, parse_ipv4_header, parse_llc_snap, ParseError, ETHERTYPE_IPV4, ICMP_HEADER_LEN, LLC_SNAP_LEN, PROTO_ICMP};
use crate::michael::{aligned_words, MicHeader, MicKey, MichaelState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VariantStrategy {
    /// Variant `i` uses IP id `i`.
    Ipv4IdSweep,
    /// Variant `i` uses ICMP id `i >> 16` and sequence number `i & 0xffff`.
    IcmpIdSeqSweep,
}

impl VariantStrategy {
    pub fn capacity(self) -> u64 {
        match self {
            VariantStrategy::Ipv4IdSweep => 1 << 16,
            VariantStrategy::IcmpIdSeqSweep => 1 << 32,
        }
    }
}

struct Layout {
    ip_off: usize,
    ihl: usize,
}

fn layout(template: &[u8], strategy: VariantStrategy) -> Result<Layout, CollisionError> {
    if !template.len().is_multiple_of(4) {
        return Err(CollisionError::Unaligned(template.len()));
    }
    let (ethertype, ip) = parse_llc_snap(template)?;
    if ethertype != ETHERTYPE_IPV4 {
        return Err(ParseError {
            offset: 6,
            what: "template is not IPv4",
        }
        .into());
    }
    let (h, ihl) = parse_ipv4_header(ip).map_err(|e| ParseError {
        offset: e.offset + LLC_SNAP_LEN,
        what: e.what,
    })?;
    if strategy == VariantStrategy::IcmpIdSeqSweep {
        if h.protocol != PROTO_ICMP {
            return Err(ParseError {
                offset: LLC_SNAP_LEN + 9,
                what: "template is not ICMP",
            }
            .into());
        }
        if ip.len() < ihl + ICMP_HEADER_LEN {
            return Err(ParseError {
                offset: template.len(),
                what: "truncated ICMP header",
            }
            .into());
        }
    }
    Ok(Layout {
        ip_off: LLC_SNAP_LEN,
        ihl,
    })
}

fn patch(buf: &mut [u8], l: &Layout, strategy: VariantStrategy, id: u32) {
    let ip = l.ip_off;
    match strategy {
        VariantStrategy::Ipv4IdSweep => {
            buf[ip + 4..ip + 6].copy_from_slice(&(id as u16).to_be_bytes());
            buf[ip + 10..ip + 12].fill(0);
            let c = internet_checksum(&buf[ip..ip + l.ihl]);
            buf[ip + 10..ip + 12].copy_from_slice(&c.to_be_bytes());
        }
        VariantStrategy::IcmpIdSeqSweep => {
            let icmp = ip + l.ihl;
            buf[icmp + 4..icmp + 8].copy_from_slice(&id.to_be_bytes());
            buf[icmp + 2..icmp + 4].fill(0);
            let c = internet_checksum(&buf[icmp..]);
            buf[icmp + 2..icmp + 4].copy_from_slice(&c.to_be_bytes());
        }
    }
}

/// Offset of the first byte any variant may change.
fn first_changed(l: &Layout, strategy: VariantStrategy) -> usize {
    match strategy {
        VariantStrategy::Ipv4IdSweep => l.ip_off + 4,
        VariantStrategy::IcmpIdSeqSweep => l.ip_off + l.ihl + 2,
    }
}

/// The template rewritten as variant `id`, with checksums recomputed.
///
/// The ICMP checksum covers the template's ICMP bytes only.
pub fn variant_bytes(template: &[u8], strategy: VariantStrategy, id: u32) -> Result<Vec<u8>, CollisionError> {
    if u64::from(id) >= strategy.capacity() {
        return Err(CollisionError::CapacityExceeded {
            requested: u64::from(id) + 1,
            capacity: strategy.capacity(),
        });
    }
    let l = layout(template, strategy)?;
    let mut buf = template.to_vec();
    patch(&mut buf, &l, strategy, id);
    Ok(buf)
}

/// Michael states after `header ‖ variant_bytes(template, strategy, i)` for
/// `i` in `0..count`.
pub fn gen_variants(
    template: &[u8],
    strategy: VariantStrategy,
    count: u64,
    key: &MicKey,
    header: &MicHeader,
) -> Result<Vec<(u32, MichaelState)>, CollisionError> {
    if count > strategy.capacity() {
        return Err(CollisionError::CapacityExceeded {
            requested: count,
            capacity: strategy.capacity(),
        });
    }
    let l = layout(template, strategy)?;
    let split = first_changed(&l, strategy) & !3;
    let shared = key
        .initial_state()
        .absorb_all(&header.words())
        .absorb_all(&aligned_words(&template[..split]));

    let mut buf = template.to_vec();
    let mut out = Vec::with_capacity(count as usize);
    for id in 0..count {
        let id = id as u32;
        patch(&mut buf, &l, strategy, id);
        let s = buf[split..]
            .chunks_exact(4)
            .fold(shared, |s, c| s.absorb(u32::from_le_bytes([c[0], c[1], c[2], c[3]])));
        out.push((id, s));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::addr::{Direction, MacAddr};
    use crate::frames::packet::{icmp_checksum_ok, ipv4_header_checksum_ok, llc_ipv4, Ipv4Header, IcmpEcho};
    use crate::michael::state_after;
    use std::collections::HashSet;
    use std::net::Ipv4Addr;

    fn template() -> Vec<u8> {
        let echo = IcmpEcho::request(0, 0, vec![0xab; 4]).encode();
        let ip = Ipv4Header::new(Ipv4Addr::new(203, 0, 113, 7), Ipv4Addr::new(10, 0, 0, 2), PROTO_ICMP, 500);
        llc_ipv4(&ip, &echo)
    }

    fn hdr() -> MicHeader {
        MicHeader::new(MacAddr([2, 0, 0, 0, 0, 2]), MacAddr([2, 0, 0, 0, 0, 1]), 0).unwrap()
    }

    #[test]
    fn first_variant_is_template() {
        let t = template();
        assert_eq!(t.len(), 40);
        assert_eq!(variant_bytes(&t, VariantStrategy::Ipv4IdSweep, 0).unwrap(), t);
        assert_eq!(variant_bytes(&t, VariantStrategy::IcmpIdSeqSweep, 0).unwrap(), t);
    }

    #[test]
    fn states_match_direct_computation_and_checksums_hold() {
        let t = template();
        let key = MicKey::new(0x1234, 0x5678, Direction::ApToClient);
        for strategy in [VariantStrategy::Ipv4IdSweep, VariantStrategy::IcmpIdSeqSweep] {
            let v = gen_variants(&t, strategy, 300, &key, &hdr()).unwrap();
            for &(id, s) in v.iter().step_by(7) {
                let b = variant_bytes(&t, strategy, id).unwrap();
                assert_eq!(state_after(&key, Some(&hdr()), &b, false).unwrap(), s);
                assert!(ipv4_header_checksum_ok(&b[8..]));
                assert!(icmp_checksum_ok(&b[28..]));
            }
        }
    }

    #[test]
    fn full_ip_id_sweep_gives_distinct_packets() {
        let t = template();
        let key = MicKey::new(9, 10, Direction::ApToClient);
        let v = gen_variants(&t, VariantStrategy::Ipv4IdSweep, 1 << 16, &key, &hdr()).unwrap();
        assert_eq!(v.len(), 1 << 16);
        let states: HashSet<_> = v.iter().map(|&(_, s)| s).collect();
        assert!(states.len() > (1 << 16) - 4);
    }

    #[test]
    fn errors() {
        let t = template();
        let key = MicKey::new(1, 2, Direction::ApToClient);
        assert_eq!(
            gen_variants(&t, VariantStrategy::Ipv4IdSweep, (1 << 16) + 1, &key, &hdr()),
            Err(CollisionError::CapacityExceeded {
                requested: (1 << 16) + 1,
                capacity: 1 << 16
            })
        );
        assert_eq!(
            gen_variants(&t[..38], VariantStrategy::Ipv4IdSweep, 1, &key, &hdr()),
            Err(CollisionError::Unaligned(38))
        );
        assert!(matches!(
            gen_variants(&t[..32], VariantStrategy::IcmpIdSeqSweep, 1, &key, &hdr()),
            Err(CollisionError::Parse(_))
        ));
        assert!(matches!(
            variant_bytes(&[0u8; 40], VariantStrategy::Ipv4IdSweep, 0),
            Err(CollisionError::Parse(_))
        ));
    }
}
