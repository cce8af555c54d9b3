//! Run a scenario from its text form and print the transcript summary.

use tkipkit::attacks::script::run_scripted;
use tkipkit::collision::SearchOptions;
use tkipkit::simnet::{Event, Scenario};

const SCENARIO: &str = "
seed = 3
rekey_interval = 120   # defeats the one-byte-per-minute chop
attack = chopchop
";

fn main() {
    let sc = Scenario::parse(SCENARIO).unwrap();
    let r = run_scripted(&sc, &SearchOptions::default()).unwrap();
    let (summary, capture) = r.result;
    let jsonl = r.transcript.to_jsonl();
    println!("{} transcript lines, {} captured MPDUs", jsonl.lines().count(), capture.len());
    println!("rekeys: {}", r.transcript.count(|e| matches!(e, Event::Rekey { .. })));
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
}
