use std::fs;
use std::io::{self, Read, Write};
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use tkipkit::addr::{Direction, MacAddr};
use tkipkit::attacks::script::run_scripted;
use tkipkit::bench::{bench_collide, summarize, BenchConfig};
use tkipkit::collision::{
    anchor_target, build_filter, find_magic_words_filtered, find_magic_words_naive, gen_variants, splice_prefix,
    variant_bytes, verify_spliced, Anchor, CollisionProblem, MagicWords, SearchOptions, VariantStrategy,
};
use tkipkit::frames::capture::{hex_dump, read_capture, write_capture};
use tkipkit::frames::packet::parse_arp;
use tkipkit::keystream::{harvest, HarvestContext, KeystreamPool, Template};
use tkipkit::michael::{mic_compute, recover_key, state_after, Mic, MicHeader, MicKey};
use tkipkit::simnet::Scenario;

#[derive(Parser)]
#[command(name = "tkip", version, about = "TKIP Michael and keystream toolkit")]
struct Cli {
    /// Search threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for randomized inputs and scenario overrides.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Michael MIC computation and key recovery.
    #[command(subcommand)]
    Mic(MicCmd),
    /// Magic-word search and verification.
    #[command(subcommand)]
    Collide(CollideCmd),
    /// Majority-bit filters.
    #[command(subcommand)]
    Filter(FilterCmd),
    /// Keystream candidates from a frame capture, as TKKS text.
    Harvest(HarvestArgs),
    /// Annotated hex dump of a frame capture.
    Dump {
        capture: PathBuf,
    },
    /// Simulated network runs.
    #[command(subcommand)]
    Sim(SimCmd),
    /// Benchmarks.
    #[command(subcommand)]
    Bench(BenchCmd),
}

#[derive(Subcommand)]
enum MicCmd {
    Compute {
        #[arg(long, value_parser = parse_key)]
        key: [u8; 8],
        #[command(flatten)]
        hdr: HeaderArgs,
        #[arg(long, value_parser = parse_hex, default_value = "")]
        payload: Bytes,
    },
    Recover {
        #[command(flatten)]
        hdr: HeaderArgs,
        #[arg(long, value_parser = parse_hex, default_value = "")]
        payload: Bytes,
        #[arg(long, value_parser = parse_mic)]
        mic: Mic,
        #[arg(long, value_enum, default_value_t = Dir::Down)]
        direction: Dir,
    },
}

#[derive(Subcommand)]
enum CollideCmd {
    /// Scan the first magic word for one inserted prefix.
    Naive {
        #[command(flatten)]
        inst: InstanceArgs,
        /// Inserted prefix, word aligned.
        #[arg(long, value_parser = parse_hex)]
        prefix: Bytes,
        #[arg(long, default_value_t = 0)]
        start: u64,
        #[arg(long, default_value_t = 1 << 32)]
        end: u64,
    },
    /// Scan the second magic word against 2^k variants of a template.
    Filtered {
        #[command(flatten)]
        inst: InstanceArgs,
        /// LLC/IPv4 template, word aligned.
        #[arg(long, value_parser = parse_hex)]
        template: Bytes,
        #[arg(long, default_value_t = 16)]
        k: u32,
        #[arg(long, default_value_t = 8)]
        n: u32,
        #[arg(long, value_enum, default_value_t = Sweep::IpId)]
        strategy: Sweep,
    },
    /// Check a finder's output against the MIC of an original payload.
    Verify {
        /// Finder output as JSON; "-" reads standard input.
        #[arg(long)]
        solution: PathBuf,
        /// Original payload; random when omitted.
        #[arg(long, value_parser = parse_hex)]
        payload: Option<Bytes>,
        /// Original MIC; computed from the payload when omitted.
        #[arg(long, value_parser = parse_mic)]
        mic: Option<Mic>,
    },
}

#[derive(Subcommand)]
enum FilterCmd {
    /// Majority filter over right words, one "id word" or "word" per line
    /// (hex words).
    Build {
        #[arg(long)]
        n: u32,
        /// Word list; standard input when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

#[derive(Args)]
struct HarvestArgs {
    #[arg(long)]
    capture: PathBuf,
    #[arg(long, value_enum)]
    template: Tpl,
    /// Frames from this direction only.
    #[arg(long, value_enum, default_value_t = Dir::Down)]
    direction: Dir,
    /// ARP body (28 bytes) for the ARP template.
    #[arg(long, value_parser = parse_hex)]
    arp: Option<Bytes>,
    #[arg(long)]
    src_ip: Option<Ipv4Addr>,
    #[arg(long)]
    dst_ip: Option<Ipv4Addr>,
    #[arg(long, default_value_t = 0)]
    sport: u16,
    #[arg(long, default_value_t = 0)]
    dport: u16,
    #[arg(long, default_value_t = 0)]
    seq: u32,
    /// MIC key and addresses, to extend entries over MIC and ICV.
    #[arg(long, value_parser = parse_key, requires_all = ["da", "sa"])]
    mic_key: Option<[u8; 8]>,
    #[arg(long)]
    da: Option<MacAddr>,
    #[arg(long)]
    sa: Option<MacAddr>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SimCmd {
    /// Run a scenario file; writes the transcript as JSON lines.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write every observed air frame as a TKPF capture.
        #[arg(long)]
        capture: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum BenchCmd {
    /// Filtered search over random keys; one CSV row per key.
    Collide {
        #[arg(long, default_value_t = 8)]
        n: u32,
        #[arg(long, default_value_t = 16)]
        k: u32,
        #[arg(long, default_value_t = 1024)]
        keys: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = AnchorArg::Key)]
        anchor: AnchorArg,
    },
}

#[derive(Args)]
struct HeaderArgs {
    #[arg(long)]
    da: MacAddr,
    #[arg(long)]
    sa: MacAddr,
    #[arg(long, default_value_t = 0)]
    prio: u8,
}

#[derive(Args)]
struct InstanceArgs {
    #[arg(long, value_parser = parse_key)]
    key: [u8; 8],
    #[command(flatten)]
    hdr: HeaderArgs,
    /// Priority of the original frame; defaults to --prio.
    #[arg(long)]
    orig_prio: Option<u8>,
    #[arg(long, value_enum, default_value_t = AnchorArg::Key)]
    anchor: AnchorArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dir {
    Down,
    Up,
}

impl From<Dir> for Direction {
    fn from(d: Dir) -> Self {
        match d {
            Dir::Down => Direction::ApToClient,
            Dir::Up => Direction::ClientToAp,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum AnchorArg {
    Key,
    AfterHeader,
}

impl From<AnchorArg> for Anchor {
    fn from(a: AnchorArg) -> Self {
        match a {
            AnchorArg::Key => Anchor::KeyState,
            AnchorArg::AfterHeader => Anchor::AfterHeaderState,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Sweep {
    IpId,
    IcmpIdSeq,
}

#[derive(Clone, Copy, ValueEnum)]
enum Tpl {
    LlcIpv4,
    LlcArp,
    TcpRst,
}

type Bytes = Vec<u8>;

fn parse_hex(s: &str) -> Result<Bytes, String> {
    let clean: String = s.chars().filter(|c| !c.is_whitespace() && *c != ':').collect();
    hex::decode(clean).map_err(|e| e.to_string())
}

fn parse_fixed<const N: usize>(s: &str) -> Result<[u8; N], String> {
    parse_hex(s)?
        .try_into()
        .map_err(|v: Vec<u8>| format!("expected {N} bytes, got {}", v.len()))
}

fn parse_key(s: &str) -> Result<[u8; 8], String> {
    parse_fixed::<8>(s)
}

fn parse_mic(s: &str) -> Result<Mic, String> {
    parse_fixed::<8>(s)
}

/// Finder output; self-contained so `collide verify` needs nothing else.
#[derive(Serialize, Deserialize)]
struct SolutionDoc {
    key: String,
    da: String,
    sa: String,
    prio: u8,
    orig_prio: u8,
    anchor: AnchorArg,
    prefix: String,
    mw1: String,
    mw2: String,
    variant_id: u32,
    position: u64,
    spliced: String,
}

struct Failure {
    kind: &'static str,
    message: String,
}

fn fail(kind: &'static str, e: impl std::fmt::Display) -> Failure {
    Failure {
        kind,
        message: e.to_string(),
    }
}

type Res = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let _ = writeln!(io::stdout(), "{}", json!({ "error": f.kind, "message": f.message }));
            ExitCode::from(1)
        }
    }
}

fn search_opts(cli: &Cli) -> SearchOptions {
    cli.workers.map(SearchOptions::with_workers).unwrap_or_default()
}

fn header(h: &HeaderArgs, prio: u8) -> Result<MicHeader, Failure> {
    MicHeader::new(h.da, h.sa, prio).map_err(|e| fail("bad_header", e))
}

fn emit(out: Option<&Path>, text: &[u8]) -> Res {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| fail("io", e)),
        None => io::stdout().write_all(text).map_err(|e| fail("io", e)),
    }
}

fn read_input(p: &Path) -> Result<Vec<u8>, Failure> {
    if p.as_os_str() == "-" {
        let mut buf = Vec::new();
        io::stdin().read_to_end(&mut buf).map_err(|e| fail("io", e))?;
        Ok(buf)
    } else {
        fs::read(p).map_err(|e| fail("io", format!("{}: {e}", p.display())))
    }
}

fn dispatch(cli: &Cli) -> Res {
    match &cli.cmd {
        Cmd::Mic(MicCmd::Compute { key, hdr, payload }) => {
            let k = MicKey::from_bytes(*key, Direction::ApToClient);
            let mic = mic_compute(&k, &header(hdr, hdr.prio)?, payload).map_err(|e| fail("michael", e))?;
            println!("{}", hex::encode(mic));
        }
        Cmd::Mic(MicCmd::Recover {
            hdr,
            payload,
            mic,
            direction,
        }) => {
            let k = recover_key(&header(hdr, hdr.prio)?, payload, mic, (*direction).into())
                .map_err(|e| fail("michael", e))?;
            println!("{}", hex::encode(k.to_bytes()));
        }
        Cmd::Collide(c) => collide(cli, c)?,
        Cmd::Filter(FilterCmd::Build { n, input }) => {
            let text = match input {
                Some(p) => read_input(p)?,
                None => read_input(Path::new("-"))?,
            };
            let words = parse_word_list(&String::from_utf8_lossy(&text))?;
            let f = build_filter(&words, *n).map_err(|e| fail("collision", e))?;
            println!("{}", serde_json::to_string(&f).expect("filter serializes"));
        }
        Cmd::Harvest(h) => harvest_cmd(h)?,
        Cmd::Dump { capture } => {
            let recs = read_capture(&read_input(capture)?[..]).map_err(|e| fail("capture", e))?;
            let text: String = recs.iter().map(|r| hex_dump(r.direction, &r.mpdu)).collect();
            emit(None, text.as_bytes())?;
        }
        Cmd::Sim(SimCmd::Run { scenario, out, capture }) => {
            let text = String::from_utf8_lossy(&read_input(scenario)?).into_owned();
            let mut sc = Scenario::parse(&text).map_err(|e| fail("scenario", e))?;
            if let Some(s) = cli.seed {
                sc.seed = s;
            }
            let r = run_scripted(&sc, &search_opts(cli)).map_err(|e| fail("scenario", e))?;
            emit(out.as_deref(), r.transcript.to_jsonl().as_bytes())?;
            let (summary, records) = r.result;
            if let Some(p) = capture {
                let mut buf = Vec::new();
                write_capture(&mut buf, &records).map_err(|e| fail("io", e))?;
                fs::write(p, buf).map_err(|e| fail("io", e))?;
            }
            if !summary.ok {
                return Err(Failure {
                    kind: summary.error_kind.unwrap_or("attack_failed"),
                    message: summary.error.unwrap_or_default(),
                });
            }
        }
        Cmd::Bench(BenchCmd::Collide { n, k, keys, out, anchor }) => {
            let cfg = BenchConfig {
                n: *n,
                k: *k,
                keys: *keys,
                seed: cli.seed.unwrap_or(0),
                anchor: (*anchor).into(),
                search: search_opts(cli),
            };
            let rows = match out {
                Some(p) => {
                    let f = fs::File::create(p).map_err(|e| fail("io", e))?;
                    bench_collide(&cfg, io::BufWriter::new(f))
                }
                None => bench_collide(&cfg, io::stdout().lock()),
            }
            .map_err(|e| fail("bench", e))?;
            if out.is_some() {
                if let Some(s) = summarize(&rows) {
                    println!("{}", serde_json::to_string(&s).expect("stats serialize"));
                }
            }
        }
    }
    Ok(())
}

fn parse_word_list(text: &str) -> Result<Vec<(u32, u32)>, Failure> {
    let mut out = Vec::new();
    for (i, line) in text.lines().map(str::trim).filter(|l| !l.is_empty()).enumerate() {
        let bad = || fail("bad_input", format!("line {}: {line:?}", i + 1));
        let f: Vec<&str> = line.split_whitespace().collect();
        let (id, w) = match f[..] {
            [w] => (i as u32, w),
            [id, w] => (id.parse().map_err(|_| bad())?, w),
            _ => return Err(bad()),
        };
        let w = u32::from_str_radix(w.trim_start_matches("0x"), 16).map_err(|_| bad())?;
        out.push((id, w));
    }
    Ok(out)
}

fn solution_doc(inst: &InstanceArgs, prefix: &[u8], mw: MagicWords, variant_id: u32, position: u64) -> Result<SolutionDoc, Failure> {
    let orig = header(&inst.hdr, inst.orig_prio.unwrap_or(inst.hdr.prio))?;
    Ok(SolutionDoc {
        key: hex::encode(inst.key),
        da: inst.hdr.da.to_string(),
        sa: inst.hdr.sa.to_string(),
        prio: inst.hdr.prio,
        orig_prio: orig.priority(),
        anchor: inst.anchor,
        prefix: hex::encode(prefix),
        mw1: format!("{:08x}", mw.mw1),
        mw2: format!("{:08x}", mw.mw2),
        variant_id,
        position,
        spliced: hex::encode(splice_prefix(prefix, &mw, inst.anchor.into(), &orig)),
    })
}

fn collide(cli: &Cli, c: &CollideCmd) -> Res {
    let opts = search_opts(cli);
    let col = |e| fail("collision", e);
    let doc = match c {
        CollideCmd::Naive {
            inst,
            prefix,
            start,
            end,
        } => {
            let key = MicKey::from_bytes(inst.key, Direction::ApToClient);
            let new = header(&inst.hdr, inst.hdr.prio)?;
            let orig = header(&inst.hdr, inst.orig_prio.unwrap_or(inst.hdr.prio))?;
            let p = CollisionProblem::for_prefix(key, &new, prefix, inst.anchor.into(), &orig).map_err(col)?;
            let sol = find_magic_words_naive(&p, *start..*end, &opts).map_err(col)?;
            solution_doc(inst, prefix, sol.words, sol.variant_id, sol.position)?
        }
        CollideCmd::Filtered {
            inst,
            template,
            k,
            n,
            strategy,
        } => {
            let strategy = match strategy {
                Sweep::IpId => VariantStrategy::Ipv4IdSweep,
                Sweep::IcmpIdSeq => VariantStrategy::IcmpIdSeqSweep,
            };
            if *k > 32 {
                return Err(fail("bad_input", "k must be at most 32"));
            }
            let key = MicKey::from_bytes(inst.key, Direction::ApToClient);
            let new = header(&inst.hdr, inst.hdr.prio)?;
            let orig = header(&inst.hdr, inst.orig_prio.unwrap_or(inst.hdr.prio))?;
            let states = gen_variants(template, strategy, 1u64 << k, &key, &new).map_err(col)?;
            let p = CollisionProblem::new(key, states, inst.anchor.into(), &orig).map_err(col)?;
            let f = build_filter(&p.right_words(), *n).map_err(col)?;
            let sol = find_magic_words_filtered(&p, &f, 0..1 << 32, &opts).map_err(col)?;
            let insert = variant_bytes(template, strategy, sol.variant_id).map_err(col)?;
            solution_doc(inst, &insert, sol.words, sol.variant_id, sol.position)?
        }
        CollideCmd::Verify { solution, payload, mic } => return verify(cli, solution, payload.as_deref(), *mic),
    };
    println!("{}", serde_json::to_string(&doc).expect("solution serializes"));
    Ok(())
}

fn verify(cli: &Cli, solution: &Path, payload: Option<&[u8]>, mic: Option<Mic>) -> Res {
    let doc: SolutionDoc = serde_json::from_slice(&read_input(solution)?).map_err(|e| fail("bad_input", e))?;
    let bad = |what: &str| fail("bad_input", what.to_string());
    let key = MicKey::from_bytes(parse_key(&doc.key).map_err(|e| bad(&e))?, Direction::ApToClient);
    let da: MacAddr = doc.da.parse().map_err(|_| bad("da"))?;
    let sa: MacAddr = doc.sa.parse().map_err(|_| bad("sa"))?;
    let new = MicHeader::new(da, sa, doc.prio).map_err(|e| fail("bad_header", e))?;
    let orig = MicHeader::new(da, sa, doc.orig_prio).map_err(|e| fail("bad_header", e))?;
    let prefix = parse_hex(&doc.prefix).map_err(|e| bad(&e))?;
    let word = |s: &str| u32::from_str_radix(s, 16).map_err(|_| bad("magic word"));
    let mw = MagicWords {
        mw1: word(&doc.mw1)?,
        mw2: word(&doc.mw2)?,
    };
    let anchor: Anchor = doc.anchor.into();

    let payload = match payload {
        Some(p) => p.to_vec(),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed.unwrap_or(0));
            let len = rng.gen_range(1..512);
            (0..len).map(|_| rng.gen()).collect()
        }
    };
    let mic = match mic {
        Some(m) => m,
        None => mic_compute(&key, &orig, &payload).map_err(|e| fail("michael", e))?,
    };
    let state_ok = state_after(&key, Some(&new), &prefix, false)
        .map(|s| mw.apply(s) == anchor_target(&key, anchor, &orig))
        .unwrap_or(false);
    let mic_ok = verify_spliced(&key, &new, &orig, &prefix, &mw, anchor, &payload, &mic);
    println!(
        "{}",
        json!({ "valid": state_ok && mic_ok, "state_reset": state_ok, "mic_matches": mic_ok, "payload_len": payload.len() })
    );
    if state_ok && mic_ok {
        Ok(())
    } else {
        Err(fail("verify_failed", "magic words do not reset the Michael state"))
    }
}

fn harvest_cmd(h: &HarvestArgs) -> Res {
    let recs = read_capture(&read_input(&h.capture)?[..]).map_err(|e| fail("capture", e))?;
    let dir: Direction = h.direction.into();
    let arp = match &h.arp {
        Some(b) => Some(parse_arp(b).map_err(|e| fail("bad_input", e))?),
        None => None,
    };
    let mic = match (h.mic_key, h.da, h.sa) {
        (Some(k), Some(da), Some(sa)) => Some((MicKey::from_bytes(k, dir), MicHeader::new(da, sa, 0).map_err(|e| fail("bad_header", e))?)),
        _ => None,
    };
    let template = match h.template {
        Tpl::LlcIpv4 => Template::LlcIpv4,
        Tpl::LlcArp => Template::LlcArp,
        Tpl::TcpRst => Template::TcpRstLinux,
    };
    let mut pool = KeystreamPool::new();
    let mut skipped = 0usize;
    for r in recs.iter().filter(|r| r.direction == dir) {
        let ctx = HarvestContext {
            arp,
            src_ip: h.src_ip,
            dst_ip: h.dst_ip,
            src_port: h.sport,
            dst_port: h.dport,
            seq: h.seq,
            mic: match &mic {
                Some((k, hdr)) => Some((*k, hdr.with_priority(r.mpdu.qos_channel).map_err(|e| fail("bad_header", e))?)),
                None => None,
            },
        };
        match harvest(&r.mpdu, template, &ctx) {
            Ok(c) => pool.insert(c),
            Err(_) => skipped += 1,
        }
    }
    emit(h.out.as_deref(), pool.to_tkks().as_bytes())?;
    if h.out.is_some() {
        println!("{}", json!({ "entries": pool.len(), "skipped": skipped }));
    }
    Ok(())
}
