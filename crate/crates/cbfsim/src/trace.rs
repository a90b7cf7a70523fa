//! Observation points.
//!
//! The simulation narrates itself through a sink trait; collectors decide
//! what to keep. Full runs push on the order of 10^8 records, so sinks must
//! be streaming — buffering everything is only for small tests.

use crate::engine::{SimDur, SimTime};
use crate::geonet::MsgKey;
use crate::mobility::{Fleet, NodeId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceKind {
    /// A frame starts on air. `msg` is `None` for single-hop beacons.
    TxStart {
        msg: Option<MsgKey>,
        pos_x: f64,
        airtime: SimDur,
    },
    TxEnd,
    /// A geo-broadcast copy decoded and handed to the network layer fresh.
    RxDelivered { msg: MsgKey, pos_x: f64 },
    /// A geo-broadcast copy destroyed by overlap or half-duplex deafness.
    RxCollided { msg: MsgKey },
    CbfArm { msg: MsgKey, timer: SimDur },
    CbfCancel { msg: MsgKey },
    CbfForward { msg: MsgKey, hop_limit: u8 },
    DplHit { msg: MsgKey },
    QueueDrop { tc: usize },
    GateWait { wait: SimDur },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t: SimTime,
    pub node: NodeId,
    pub kind: TraceKind,
}

pub trait TraceSink {
    fn record(&mut self, rec: &TraceRecord);

    /// A geo-broadcast message was born. Sinks that tally per-message
    /// statistics snapshot the population here; others ignore it.
    fn open_message(&mut self, _key: MsgKey, _gen_at: SimTime, _lifetime: SimDur, _fleet: &Fleet) {
    }
}

/// Keeps everything; test-sized runs only.
#[derive(Debug, Default)]
pub struct VecSink {
    pub records: Vec<TraceRecord>,
}

impl TraceSink for VecSink {
    fn record(&mut self, rec: &TraceRecord) {
        self.records.push(*rec);
    }
}

#[derive(Debug, Default)]
pub struct NullSink;

impl TraceSink for NullSink {
    fn record(&mut self, _rec: &TraceRecord) {}
}

impl<A: TraceSink, B: TraceSink> TraceSink for (A, B) {
    fn record(&mut self, rec: &TraceRecord) {
        self.0.record(rec);
        self.1.record(rec);
    }

    fn open_message(&mut self, key: MsgKey, gen_at: SimTime, lifetime: SimDur, fleet: &Fleet) {
        self.0.open_message(key, gen_at, lifetime, fleet);
        self.1.open_message(key, gen_at, lifetime, fleet);
    }
}
