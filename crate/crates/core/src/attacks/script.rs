//! Canned attack programs, one per [`AttackKind`], as run by `tkip sim run`.

use serde::Serialize;
use serde_json::{json, Value};

use super::{AttackError, ChopConfig, IcmpDecryptConfig, LocalScanConfig, RemoteScanConfig, Session};
use crate::collision::SearchOptions;
use crate::frames::capture::CaptureRecord;
use crate::keystream::Provenance;
use crate::simnet::{run, AttackKind, Attacker, Micros, Scenario, ScenarioError, SimRun, SECOND};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub attack: &'static str,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_kind: Option<&'static str>,
    pub t_us: Micros,
    pub detail: Value,
}

pub fn attack_name(kind: AttackKind) -> &'static str {
    match kind {
        AttackKind::None => "none",
        AttackKind::Chopchop => "chopchop",
        AttackKind::TcpScanLocal => "tcp-scan-local",
        AttackKind::TcpScanRemote => "tcp-scan-remote",
        AttackKind::IcmpDecrypt => "icmp-decrypt",
    }
}

/// Run the scenario's attack; the summary is also the transcript's last note.
/// Alongside it comes every air frame the attacker saw.
pub fn run_scripted(
    sc: &Scenario,
    search: &SearchOptions,
) -> Result<SimRun<(Summary, Vec<CaptureRecord>)>, ScenarioError> {
    run(sc, |a| {
        let mut detail = json!({});
        let mut s = Session::new();
        s.record = Some(Vec::new());
        let out = program(sc, search, a, &mut s, &mut detail);
        let sum = Summary {
            attack: attack_name(sc.attack),
            ok: out.is_ok(),
            error_kind: out.as_ref().err().map(AttackError::kind),
            error: out.err().map(|e| e.to_string()),
            t_us: a.now(),
            detail,
        };
        a.note("summary", serde_json::to_string(&sum).expect("summary serializes"), None);
        (sum, s.record.take().unwrap_or_default())
    })
}

fn chop(a: &mut Attacker<'_>, s: &mut Session, sc: &Scenario, detail: &mut Value) -> Result<(), AttackError> {
    let arp = s
        .await_arp(a, 60 * SECOND)
        .ok_or(AttackError::BadTarget("no ARP frame seen within 60 s"))?;
    let cfg = ChopConfig {
        bytes: sc.attack_bytes,
        ..ChopConfig::default()
    };
    let r = s.chopchop(a, &arp, &cfg)?;
    detail["chopchop"] = json!({
        "tsc": r.tsc,
        "channel": r.channel,
        "bytes": r.plaintext_tail.len(),
        "mean_guesses": r.mean_guesses(),
        "plaintext_tail": hex::encode(&r.plaintext_tail),
        "keystream_tail": hex::encode(&r.keystream_tail),
        "mic_key": r.mic_key.map(|k| hex::encode(k.to_bytes())),
        "elapsed_us": r.finished - r.started,
    });
    Ok(())
}

fn program(
    sc: &Scenario,
    search: &SearchOptions,
    a: &mut Attacker<'_>,
    s: &mut Session,
    detail: &mut Value,
) -> Result<(), AttackError> {
    match sc.attack {
        AttackKind::None => {
            s.wait(a, sc.attack_duration_s * SECOND);
            detail["captured"] = json!(s.captured.len());
            detail["pool_entries"] = json!(s.pool.len());
        }
        AttackKind::Chopchop => chop(a, s, sc, detail)?,
        AttackKind::TcpScanLocal => {
            chop(a, s, sc, detail)?;
            let r = s.tcp_scan_local(a, &LocalScanConfig::default())?;
            detail["tcp_scan_local"] = json!({
                "confirmed": r.confirmed.len(),
                "per_round": r.per_round,
                "rejected": r.rejected,
                "probes": r.probes,
            });
        }
        AttackKind::TcpScanRemote => {
            chop(a, s, sc, detail)?;
            let cfg = RemoteScanConfig {
                pad_len: sc.attack_pad_len,
                ..RemoteScanConfig::default()
            };
            let r = s.tcp_scan_remote(a, &cfg)?;
            detail["tcp_scan_remote"] = json!({
                "ttl": r.ttl,
                "entries": r.entries.len(),
                "entry_len": r.entry_len,
                "wan_bytes": r.wan_bytes,
                "elapsed_us": r.finished - r.started,
            });
        }
        AttackKind::IcmpDecrypt => {
            chop(a, s, sc, detail)?;
            let mut results = Vec::new();
            for only in [None, Some(Provenance::IcmpEchoLoop)] {
                s.wait(a, 2 * SECOND);
                let target = s
                    .captured
                    .iter()
                    .rev()
                    .find(|c| c.frame.len() > 64)
                    .map(|c| c.frame.clone())
                    .ok_or(AttackError::BadTarget("no IPv4 frame captured"))?;
                let cfg = IcmpDecryptConfig {
                    search: search.clone(),
                    only,
                    ..IcmpDecryptConfig::default()
                };
                let d = s.icmp_decrypt(a, &target, &cfg)?;
                results.push(json!({
                    "tsc": d.tsc,
                    "channel": d.channel,
                    "fragments": d.fragments,
                    "body": hex::encode(&d.body),
                    "mic": hex::encode(d.mic),
                    "search_position": d.solution.position,
                }));
            }
            detail["icmp_decrypt"] = Value::Array(results);
        }
    }
    Ok(())
}
