//! Ground truth kept by the simulator for verification. Attack code never
//! sees it.

use super::Micros;
use crate::addr::Direction;
use crate::frames::{KeystreamOracle, LinkKeys, MichaelCtr};
use crate::keystream::KeystreamEntry;
use crate::michael::{Mic, MicHeader};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyEpoch {
    pub start: Micros,
    pub down: LinkKeys,
    pub up: LinkKeys,
}

impl KeyEpoch {
    pub fn keys(&self, direction: Direction) -> &LinkKeys {
        match direction {
            Direction::ApToClient => &self.down,
            Direction::ClientToAp => &self.up,
        }
    }
}

/// A frame sent by the AP or the client.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentFrame {
    pub at: Micros,
    pub epoch: usize,
    pub direction: Direction,
    pub channel: u8,
    pub tsc: u64,
    pub header: MicHeader,
    pub body: Vec<u8>,
    pub mic: Mic,
}

/// An MSDU the client accepted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Accepted {
    pub at: Micros,
    pub injected: bool,
    pub channel: u8,
    pub body: Vec<u8>,
}

#[derive(Debug, Clone, Default)]
pub struct Audit {
    pub epochs: Vec<KeyEpoch>,
    pub sent: Vec<SentFrame>,
    pub accepted: Vec<Accepted>,
    pub mic_failures: Vec<Micros>,
    pub countermeasures: Vec<Micros>,
    oracle: MichaelCtr,
}

impl Audit {
    pub fn current(&self) -> &KeyEpoch {
        self.epochs.last().expect("simulation starts with keys")
    }

    pub fn keystream(&self, epoch: usize, direction: Direction, tsc: u64, len: usize) -> Vec<u8> {
        self.oracle.keystream(&self.epochs[epoch].keys(direction).tk, tsc, len)
    }

    /// Most recent legitimate frame with this TSC.
    pub fn sent_frame(&self, direction: Direction, tsc: u64) -> Option<&SentFrame> {
        self.sent.iter().rev().find(|f| f.direction == direction && f.tsc == tsc)
    }

    /// True iff every byte of a downstream entry matches the real keystream.
    pub fn entry_is_exact(&self, e: &KeystreamEntry) -> bool {
        match self.sent_frame(Direction::ApToClient, e.tsc) {
            Some(f) => self.keystream(f.epoch, Direction::ApToClient, e.tsc, e.bytes.len()) == e.bytes,
            None => false,
        }
    }

    pub fn injected_accepted(&self) -> usize {
        self.accepted.iter().filter(|a| a.injected).count()
    }
}
