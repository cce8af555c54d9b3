//! JSON-lines run transcript.

use serde::{Deserialize, Serialize};

use super::Micros;
use crate::addr::Direction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    /// A legitimate frame on the air.
    Air {
        direction: Direction,
        tsc: u64,
        channel: u8,
        len: usize,
    },
    Inject {
        first_tsc: u64,
        channel: u8,
        fragments: usize,
        len: usize,
    },
    /// How the victim handled an injected frame.
    Rx { outcome: String },
    Report,
    Countermeasures { until_us: Micros },
    Rekey { epoch: usize },
    WanTx { len: usize },
    WanRx { len: usize },
    /// Attack progress.
    Note {
        attack: String,
        what: String,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        hex: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub t_us: Micros,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    pub lines: Vec<Line>,
}

impl Transcript {
    pub fn push(&mut self, t_us: Micros, event: Event) {
        self.lines.push(Line { t_us, event });
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for l in &self.lines {
            out.push_str(&serde_json::to_string(l).expect("transcript lines serialize"));
            out.push('\n');
        }
        out
    }

    pub fn notes<'a>(&'a self, attack: &'a str) -> impl Iterator<Item = (&'a str, Option<&'a str>)> + 'a {
        self.lines.iter().filter_map(move |l| match &l.event {
            Event::Note { attack: a, what, hex } if a == attack => Some((what.as_str(), hex.as_deref())),
            _ => None,
        })
    }

    pub fn count(&self, pred: impl Fn(&Event) -> bool) -> usize {
        self.lines.iter().filter(|l| pred(&l.event)).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_shape() {
        let mut t = Transcript::default();
        t.push(5, Event::Report);
        t.push(
            9,
            Event::Note {
                attack: "chopchop".into(),
                what: "byte".into(),
                hex: Some("ab".into()),
            },
        );
        assert_eq!(
            t.to_jsonl(),
            "{\"t_us\":5,\"event\":\"report\"}\n{\"t_us\":9,\"event\":\"note\",\"attack\":\"chopchop\",\"what\":\"byte\",\"hex\":\"ab\"}\n"
        );
        let back: Line = serde_json::from_str(t.to_jsonl().lines().nth(1).unwrap()).unwrap();
        assert_eq!(back, t.lines[1]);
    }
}
