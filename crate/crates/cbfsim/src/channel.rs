//! Shared broadcast medium.
//!
//! Unit-disk propagation: every node within `max_range_m` of a transmitter
//! senses the frame for its whole airtime and receives a copy after a
//! distance-proportional delay. Two copies whose reception intervals overlap
//! at a node destroy each other there; a node transmitting is deaf for the
//! duration (half-duplex). There is no capture and no fading unless a
//! delivery-probability curve is installed.

use rand::Rng;

use crate::engine::{SimDur, SimTime};
use crate::mobility::{Fleet, NodeId};

pub const PROPAGATION_M_PER_US: f64 = 300.0;

#[derive(Debug, Clone)]
pub struct ChannelConfig {
    pub max_range_m: f64,
    pub data_rate_bps: u64,
    pub preamble_us: u64,
    /// Optional distance → delivery-probability curve applied to otherwise
    /// clean receptions. `None` means ideal delivery inside the disk.
    pub delivery_curve: Option<DeliveryCurve>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            max_range_m: 1_500.0,
            data_rate_bps: 6_000_000,
            preamble_us: 40,
            delivery_curve: None,
        }
    }
}

impl ChannelConfig {
    /// Time on air for a frame of `bytes`: preamble plus payload bits at the
    /// configured rate, rounded to whole microseconds.
    pub fn airtime(&self, bytes: u32) -> SimDur {
        let bits = bytes as u64 * 8;
        let payload_us = (bits * 1_000_000 + self.data_rate_bps / 2) / self.data_rate_bps;
        SimDur::from_micros(self.preamble_us + payload_us)
    }
}

pub fn propagation_delay(dist_m: f64) -> SimDur {
    SimDur::from_micros((dist_m / PROPAGATION_M_PER_US).round() as u64)
}

/// Piecewise-linear delivery probability over distance. Outside the sampled
/// span the nearest endpoint holds.
#[derive(Debug, Clone)]
pub struct DeliveryCurve {
    /// (distance_m, probability) pairs, strictly increasing in distance.
    pub points: Vec<(f64, f64)>,
}

impl DeliveryCurve {
    pub fn probability_at(&self, d: f64) -> f64 {
        let pts = &self.points;
        if pts.is_empty() {
            return 1.0;
        }
        if d <= pts[0].0 {
            return pts[0].1;
        }
        if d >= pts[pts.len() - 1].0 {
            return pts[pts.len() - 1].1;
        }
        let i = pts.partition_point(|p| p.0 < d);
        let (x0, y0) = pts[i - 1];
        let (x1, y1) = pts[i];
        y0 + (y1 - y0) * (d - x0) / (x1 - x0)
    }
}

/// One pending copy at one receiver.
#[derive(Debug, Clone, Copy)]
struct ActiveRx {
    frame: u64,
    rx_start: SimTime,
    rx_end: SimTime,
    dist: f64,
    collided: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct Receiver {
    pub node: NodeId,
    pub rx_end: SimTime,
}

#[derive(Debug)]
pub struct Broadcast {
    pub receivers: Vec<Receiver>,
    pub airtime: SimDur,
    /// Largest propagation delay among the receivers; zero if none.
    pub prop_max: SimDur,
}

#[derive(Debug, Clone, Copy, Default)]
struct NodeChannel {
    busy_until: SimTime,
    tx_until: SimTime,
    /// Busy time added since the last window read, including any tail that
    /// extends past the upcoming window boundary.
    busy_accum_us: u64,
}

/// The medium itself: per-node carrier state plus in-flight receptions.
pub struct Medium {
    pub cfg: ChannelConfig,
    state: Vec<NodeChannel>,
    active: Vec<Vec<ActiveRx>>,
}

impl Medium {
    pub fn new(n_nodes: usize, cfg: ChannelConfig) -> Medium {
        Medium {
            cfg,
            state: vec![NodeChannel::default(); n_nodes],
            active: vec![Vec::new(); n_nodes],
        }
    }

    pub fn busy_until(&self, n: NodeId) -> SimTime {
        self.state[n as usize].busy_until
    }

    pub fn is_busy(&self, n: NodeId, now: SimTime) -> bool {
        self.state[n as usize].busy_until > now
    }

    fn mark_busy(&mut self, n: NodeId, now: SimTime, end: SimTime) {
        let st = &mut self.state[n as usize];
        // All marks start at `now`, so the un-counted part of the union is
        // whatever extends past the current horizon.
        let from = st.busy_until.max(now);
        if end > from {
            st.busy_accum_us += end.since(from).as_micros();
            st.busy_until = end;
        }
    }

    /// Fraction of the elapsed window this node sensed busy. Resets the
    /// accumulator, carrying over the tail of any still-busy interval.
    pub fn take_window_busy(&mut self, n: NodeId, now: SimTime, window: SimDur) -> f64 {
        let st = &mut self.state[n as usize];
        let spill = st.busy_until.saturating_since(now).as_micros();
        let in_window = st.busy_accum_us.saturating_sub(spill);
        st.busy_accum_us = spill;
        (in_window as f64 / window.as_micros() as f64).min(1.0)
    }

    /// Puts a frame on the air at `now`. Marks carrier busy at everyone in
    /// range (transmitter included), opens a reception interval per receiver,
    /// and settles collision flags: overlapping copies kill each other, and
    /// half-duplex kills receptions at nodes that are (or start) transmitting.
    pub fn broadcast(
        &mut self,
        fleet: &Fleet,
        frame: u64,
        tx: NodeId,
        now: SimTime,
        bytes: u32,
    ) -> Broadcast {
        let airtime = self.cfg.airtime(bytes);
        let tx_end = now + airtime;
        let tx_pv = fleet.position_at(tx, now);

        self.mark_busy(tx, now, tx_end);
        self.state[tx as usize].tx_until = tx_end;
        // A node that keys up loses whatever it was mid-receiving.
        for rx in &mut self.active[tx as usize] {
            if rx.rx_end > now {
                rx.collided = true;
            }
        }

        let mut receivers = Vec::new();
        let mut prop_max = SimDur::from_micros(0);
        for n in 0..fleet.len() as NodeId {
            if n == tx {
                continue;
            }
            let pv = fleet.position_at(n, now);
            let dist = fleet.geo.dist(tx_pv.x, tx_pv.y, pv.x, pv.y);
            if dist > self.cfg.max_range_m {
                continue;
            }
            self.mark_busy(n, now, tx_end);
            let prop = propagation_delay(dist);
            prop_max = prop_max.max(prop);
            let rx_start = now + prop;
            let rx_end = tx_end + prop;
            let mut rec = ActiveRx {
                frame,
                rx_start,
                rx_end,
                dist,
                collided: self.state[n as usize].tx_until > now,
            };
            for other in &mut self.active[n as usize] {
                if other.rx_start < rec.rx_end && rec.rx_start < other.rx_end {
                    other.collided = true;
                    rec.collided = true;
                }
            }
            self.active[n as usize].push(rec);
            receivers.push(Receiver { node: n, rx_end });
        }
        Broadcast {
            receivers,
            airtime,
            prop_max,
        }
    }

    /// Closes out one receiver's copy of `frame` and reports whether it was
    /// decodable. Consumes randomness only when a delivery curve is installed.
    pub fn resolve<R: Rng>(&mut self, n: NodeId, frame: u64, rng: &mut R) -> bool {
        let list = &mut self.active[n as usize];
        let i = list
            .iter()
            .position(|r| r.frame == frame)
            .expect("resolving a reception that was never opened");
        let rec = list.swap_remove(i);
        if rec.collided {
            return false;
        }
        match &self.cfg.delivery_curve {
            None => true,
            Some(curve) => rng.gen::<f64>() < curve.probability_at(rec.dist),
        }
    }
}
