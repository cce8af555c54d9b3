use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const DA: &str = "02:00:00:00:00:10";
const SA: &str = "02:00:00:00:00:01";

fn tkip(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tkip")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json_line(o: &Output) -> Value {
    serde_json::from_str(stdout(o).lines().last().unwrap()).unwrap()
}

#[test]
fn mic_compute_and_recover() {
    let o = tkip(&["mic", "compute", "--key", "0000000000000000", "--da", DA, "--sa", SA, "--payload", "00"]);
    assert!(o.status.success());
    let mic = stdout(&o).trim().to_string();
    assert_eq!(mic.len(), 16);
    let o = tkip(&["mic", "recover", "--da", DA, "--sa", SA, "--payload", "00", "--mic", &mic]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "0000000000000000");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(tkip(&["mic", "compute"]).status.code(), Some(2));
    assert_eq!(tkip(&["mic", "compute", "--key", "abc", "--da", DA, "--sa", SA]).status.code(), Some(2));
    assert_eq!(tkip(&["nonsense"]).status.code(), Some(2));
}

const TEMPLATE: &str = "aaaa0300000008004500002400000000400100000a0000010a000017080000000000000000000000";

#[test]
fn filtered_finder_output_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let sol = dir.path().join("sol.json");
    let o = tkip(&[
        "collide", "filtered", "--key", "0123456789abcdef", "--da", DA, "--sa", SA, "--prio", "4", "--orig-prio",
        "0", "--template", TEMPLATE, "--k", "16", "--n", "8",
    ]);
    assert!(o.status.success(), "{o:?}");
    fs::write(&sol, &o.stdout).unwrap();
    let doc = json_line(&o);
    assert_eq!(doc["anchor"], "key");

    let v = tkip(&["collide", "verify", "--solution", sol.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(0), "{v:?}");
    assert_eq!(json_line(&v)["valid"], true);

    let v = tkip(&["collide", "verify", "--solution", sol.to_str().unwrap(), "--payload", "0102030405"]);
    assert_eq!(v.status.code(), Some(0));

    // Flip one bit of the second word.
    let mut bad = doc.clone();
    let mw2 = u32::from_str_radix(doc["mw2"].as_str().unwrap(), 16).unwrap() ^ 1;
    bad["mw2"] = Value::String(format!("{mw2:08x}"));
    fs::write(&sol, bad.to_string()).unwrap();
    let v = tkip(&["collide", "verify", "--solution", sol.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(1));
    assert_eq!(json_line(&v)["error"], "verify_failed");
}

#[test]
fn naive_finder_reports_not_found_in_a_short_range() {
    let o = tkip(&[
        "collide", "naive", "--key", "0123456789abcdef", "--da", DA, "--sa", SA, "--prefix", "00112233", "--end", "16",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let e = json_line(&o);
    assert_eq!(e["error"], "collision");
    assert_eq!(e["message"], "no magic words in the scanned range");
}

#[test]
fn filter_build_reads_word_lists() {
    let dir = tempfile::tempdir().unwrap();
    let words = dir.path().join("w.txt");
    fs::write(&words, "0 00000002\n1 00000003\n2 00000001\n").unwrap();
    let o = tkip(&["filter", "build", "--n", "2", "--input", words.to_str().unwrap()]);
    assert!(o.status.success());
    let f = json_line(&o);
    assert_eq!(f["filter"], 1);
    assert_eq!(f["subset"], serde_json::json!([[2, 1]]));
}

fn write_scenario(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn sim_run_is_deterministic_and_feeds_harvest() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write_scenario(dir.path(), "p.scn", "seed = 5\nattack = none\nattack.duration_s = 20\n");
    let (a, b, cap) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"), dir.path().join("c.tkpf"));
    for out in [&a, &b] {
        let o = tkip(&["sim", "run", &sc, "--out", out.to_str().unwrap(), "--capture", cap.to_str().unwrap()]);
        assert!(o.status.success(), "{o:?}");
    }
    let ta = fs::read_to_string(&a).unwrap();
    assert!(ta.lines().count() > 20);
    assert_eq!(ta, fs::read_to_string(&b).unwrap());
    for line in ta.lines() {
        serde_json::from_str::<Value>(line).unwrap();
    }

    let pool = dir.path().join("pool.tkks");
    let o = tkip(&[
        "harvest", "--capture", cap.to_str().unwrap(), "--template", "llc-ipv4", "--out", pool.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    let text = fs::read_to_string(&pool).unwrap();
    assert!(text.starts_with("TKKS 1\n"));
    assert!(json_line(&o)["entries"].as_u64().unwrap() > 10);

    let o = tkip(&["dump", cap.to_str().unwrap()]);
    assert!(stdout(&o).starts_with("ApToClient tsc="));

    // A different seed changes the run.
    let o = tkip(&["--seed", "6", "sim", "run", &sc]);
    assert!(o.status.success());
    assert_ne!(stdout(&o), ta);
}

#[test]
fn sim_run_reports_attack_failure() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write_scenario(dir.path(), "q.scn", "qos = false\nattack = chopchop\n");
    let out = dir.path().join("t.jsonl");
    let o = tkip(&["sim", "run", &sc, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json_line(&o)["error"], "no_guess_accepted");
    let last = fs::read_to_string(&out).unwrap().lines().last().unwrap().to_string();
    assert!(last.contains("\"attack\":\"summary\""));

    let bad = write_scenario(dir.path(), "bad.scn", "qos = maybe\n");
    let o = tkip(&["sim", "run", &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json_line(&o)["error"], "scenario");
}

#[test]
fn bench_collide_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    let o = tkip(&["bench", "collide", "--n", "8", "--k", "16", "--keys", "3", "--out", csv.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("key_index,n,k,wall_time_ms,iterations,domain_fraction,variant_id,mw1_hex,mw2_hex")
    );
    assert_eq!(lines.count(), 3);
    assert_eq!(json_line(&o)["rows"], 3);
}
