//! Scenario files: one `key = value` per line, `#` starts a comment.
//!
//! ```text
//! seed = 7
//! qos = true
//! rekey_interval = 0          # seconds, 0 = never
//! client.mac = 02:00:00:00:00:10
//! client.ip = 10.0.0.23
//! client.tcp_open = 22,80
//! client.icmp_echo = true
//! ap.mac = 02:00:00:00:00:01
//! ap.ip = 10.0.0.1
//! ap.linux_rst = true
//! wan.host = 203.0.113.7      # attacker-controlled host; "none" to disable
//! wan.rate_kbps = 2000
//! wan.latency_ms = 20
//! wan.hops = 0
//! traffic.server = 198.51.100.20
//! traffic.ipv4_interval_ms = 500
//! traffic.ipv4_len = 60..300  # MSDU body bytes
//! traffic.arp_interval_ms = 5000
//! traffic.dscp_c0_ratio = 0
//! attack = none
//! attack.duration_s = 10
//! ```
//!
//! Every key is optional; missing keys take the defaults shown.

use std::collections::BTreeMap;
use std::net::Ipv4Addr;
use std::ops::RangeInclusive;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::addr::MacAddr;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("line {line}: {what}")]
    Syntax { line: usize, what: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("bad value for {key}: {value:?}")]
    BadValue { key: String, value: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttackKind {
    None,
    Chopchop,
    TcpScanLocal,
    TcpScanRemote,
    IcmpDecrypt,
}

impl FromStr for AttackKind {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "none" => AttackKind::None,
            "chopchop" => AttackKind::Chopchop,
            "tcp-scan-local" => AttackKind::TcpScanLocal,
            "tcp-scan-remote" => AttackKind::TcpScanRemote,
            "icmp-decrypt" => AttackKind::IcmpDecrypt,
            _ => return Err(()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub qos: bool,
    /// Seconds; 0 disables periodic rekeying.
    pub rekey_interval_s: u64,

    pub client_mac: MacAddr,
    pub client_ip: Ipv4Addr,
    pub client_tcp_open: Vec<u16>,
    pub client_icmp_echo: bool,

    pub ap_mac: MacAddr,
    pub ap_ip: Ipv4Addr,
    /// Answer stray TCP segments with zero-id, DF, TTL 64 resets.
    pub ap_linux_rst: bool,

    pub wan_host: Option<Ipv4Addr>,
    pub wan_rate_kbps: u64,
    pub wan_latency_ms: u64,
    /// TTL decrement between the WAN host and the wireless side.
    pub wan_hops: u8,

    pub traffic_server: Ipv4Addr,
    /// 0 disables background IPv4 frames.
    pub traffic_ipv4_interval_ms: u64,
    pub traffic_ipv4_len: RangeInclusive<usize>,
    /// 0 disables background ARP frames.
    pub traffic_arp_interval_ms: u64,
    pub traffic_dscp_c0_ratio: f64,

    pub attack: AttackKind,
    pub attack_duration_s: u64,
    /// Bytes the scripted chopchop recovers.
    pub attack_bytes: usize,
    pub attack_pad_len: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            seed: 7,
            qos: true,
            rekey_interval_s: 0,
            client_mac: MacAddr([0x02, 0, 0, 0, 0, 0x10]),
            client_ip: Ipv4Addr::new(10, 0, 0, 23),
            client_tcp_open: vec![22, 80],
            client_icmp_echo: true,
            ap_mac: MacAddr([0x02, 0, 0, 0, 0, 0x01]),
            ap_ip: Ipv4Addr::new(10, 0, 0, 1),
            ap_linux_rst: true,
            wan_host: Some(Ipv4Addr::new(203, 0, 113, 7)),
            wan_rate_kbps: 2000,
            wan_latency_ms: 20,
            wan_hops: 0,
            traffic_server: Ipv4Addr::new(198, 51, 100, 20),
            traffic_ipv4_interval_ms: 500,
            traffic_ipv4_len: 60..=300,
            traffic_arp_interval_ms: 5000,
            traffic_dscp_c0_ratio: 0.0,
            attack: AttackKind::None,
            attack_duration_s: 10,
            attack_bytes: 36,
            attack_pad_len: 256,
        }
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "yes" | "on" | "1" => Some(true),
        "false" | "no" | "off" | "0" => Some(false),
        _ => None,
    }
}

fn parse_range(v: &str) -> Option<RangeInclusive<usize>> {
    match v.split_once("..") {
        Some((a, b)) => Some(a.trim().parse().ok()?..=b.trim().parse().ok()?),
        None => {
            let n = v.parse().ok()?;
            Some(n..=n)
        }
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut kv = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ScenarioError::Syntax {
                line: i + 1,
                what: "expected key = value".into(),
            })?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let mut s = Scenario::default();
        for (k, v) in &kv {
            s.set(k, v)?;
        }
        s.validate()?;
        Ok(s)
    }

    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ScenarioError> {
        let bad = || ScenarioError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
        };
        fn num<T: FromStr>(v: &str) -> Option<T> {
            v.parse().ok()
        }
        match key {
            "seed" => self.seed = num(value).ok_or_else(bad)?,
            "qos" => self.qos = parse_bool(value).ok_or_else(bad)?,
            "rekey_interval" => self.rekey_interval_s = num(value).ok_or_else(bad)?,
            "client.mac" => self.client_mac = num(value).ok_or_else(bad)?,
            "client.ip" => self.client_ip = num(value).ok_or_else(bad)?,
            "client.tcp_open" => {
                self.client_tcp_open = if value.is_empty() {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|p| p.trim().parse())
                        .collect::<Result<_, _>>()
                        .map_err(|_| bad())?
                }
            }
            "client.icmp_echo" => self.client_icmp_echo = parse_bool(value).ok_or_else(bad)?,
            "ap.mac" => self.ap_mac = num(value).ok_or_else(bad)?,
            "ap.ip" => self.ap_ip = num(value).ok_or_else(bad)?,
            "ap.linux_rst" => self.ap_linux_rst = parse_bool(value).ok_or_else(bad)?,
            "wan.host" => {
                self.wan_host = if value == "none" || value.is_empty() {
                    None
                } else {
                    Some(num(value).ok_or_else(bad)?)
                }
            }
            "wan.rate_kbps" => self.wan_rate_kbps = num(value).ok_or_else(bad)?,
            "wan.latency_ms" => self.wan_latency_ms = num(value).ok_or_else(bad)?,
            "wan.hops" => self.wan_hops = num(value).ok_or_else(bad)?,
            "traffic.server" => self.traffic_server = num(value).ok_or_else(bad)?,
            "traffic.ipv4_interval_ms" => self.traffic_ipv4_interval_ms = num(value).ok_or_else(bad)?,
            "traffic.ipv4_len" => self.traffic_ipv4_len = parse_range(value).ok_or_else(bad)?,
            "traffic.arp_interval_ms" => self.traffic_arp_interval_ms = num(value).ok_or_else(bad)?,
            "traffic.dscp_c0_ratio" => self.traffic_dscp_c0_ratio = num(value).ok_or_else(bad)?,
            "attack" => self.attack = value.parse().map_err(|_| bad())?,
            "attack.duration_s" => self.attack_duration_s = num(value).ok_or_else(bad)?,
            "attack.bytes" => self.attack_bytes = num(value).ok_or_else(bad)?,
            "attack.pad_len" => self.attack_pad_len = num(value).ok_or_else(bad)?,
            _ => return Err(ScenarioError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |s: &str| Err(ScenarioError::Invalid(s.into()));
        if self.client_mac == self.ap_mac {
            return invalid("client and AP share a MAC address");
        }
        if self.client_ip == self.ap_ip {
            return invalid("client and AP share an IP address");
        }
        if self.wan_rate_kbps == 0 {
            return invalid("WAN rate must be positive");
        }
        let (lo, hi) = (*self.traffic_ipv4_len.start(), *self.traffic_ipv4_len.end());
        if lo < 28 || lo > hi || hi > 2000 {
            return invalid("traffic.ipv4_len must lie within 28..2000");
        }
        if !(0.0..=1.0).contains(&self.traffic_dscp_c0_ratio) {
            return invalid("traffic.dscp_c0_ratio must lie in [0, 1]");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_defaults() {
        let s = Scenario::parse(
            "# test\nseed = 99\nqos = off\nclient.tcp_open = 22, 8080\nwan.host = none\ntraffic.ipv4_len = 200\n",
        )
        .unwrap();
        assert_eq!(s.seed, 99);
        assert!(!s.qos);
        assert_eq!(s.client_tcp_open, vec![22, 8080]);
        assert_eq!(s.wan_host, None);
        assert_eq!(s.traffic_ipv4_len, 200..=200);
        assert_eq!(s.ap_ip, Scenario::default().ap_ip);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(Scenario::parse("seed"), Err(ScenarioError::Syntax { line: 1, .. })));
        assert!(matches!(Scenario::parse("colour = red"), Err(ScenarioError::UnknownKey(_))));
        assert!(matches!(Scenario::parse("qos = maybe"), Err(ScenarioError::BadValue { .. })));
        assert!(matches!(
            Scenario::parse("ap.mac = 02:00:00:00:00:10"),
            Err(ScenarioError::Invalid(_))
        ));
    }
}
