//! The assembled simulator: one event queue driving mobility, channel,
//! access, forwarding, and message services together.
//!
//! All coupling between layers happens here. Layers stay passive; each event
//! handler reads the clock from the engine, pokes the layers, and schedules
//! follow-up events. Event-handler order is the determinism linchpin: equal
//! fire times run in insertion order, receivers of a frame resolve in node-id
//! order, and all randomness flows from named per-seed streams.

use std::collections::HashMap;

use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::access::{AccessConfig, AccessLayer, Verdict};
use crate::channel::{Medium, Receiver};
use crate::engine::{Engine, RngFactory, SimDur, SimTime, StreamId};
use crate::facilities::{cam_due, DenmParams};
use crate::geonet::{Expiry, GbcPacket, GeonetLayer, MsgKey, RxOutcome};
use crate::metrics::{MetricsCollector, RunMetrics, SweepResults};
use crate::mobility::{Fleet, FleetError, NodeId, PositionVector, Release};
use crate::scenario::Scenario;
use crate::trace::{TraceKind, TraceRecord, TraceSink};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    /// Re-evaluate one node's beacon trigger conditions.
    CamTrigger { node: NodeId },
    /// The source births the next hazard notification.
    DenmTrigger,
    /// A contention-based-forwarding timer ran out.
    CbfTimerExpiry { node: NodeId, key: MsgKey },
    /// The duty-cycle gate reopens; the node may contend again.
    DccGateOpen { node: NodeId },
    /// A scheduled contention attempt: transmit now, or redraw if busy.
    TxStart { node: NodeId },
    TxEnd { node: NodeId },
    /// All copies of one frame finish arriving (batched per frame).
    RxEnd { frame: u64 },
    /// Global busy-ratio sampling boundary.
    CbrWindowEnd,
    MeasurementStart,
    MeasurementEnd,
}

/// What sits in an access queue: a single-hop beacon or a geo-broadcast.
#[derive(Debug, Clone)]
enum Payload {
    Beacon { bytes: u32 },
    Gbc(GbcPacket),
}

impl Payload {
    fn bytes(&self) -> u32 {
        match self {
            Payload::Beacon { bytes } => *bytes,
            Payload::Gbc(p) => p.bytes,
        }
    }

    fn key(&self) -> Option<MsgKey> {
        match self {
            Payload::Beacon { .. } => None,
            Payload::Gbc(p) => Some(p.key()),
        }
    }
}

struct NodeStack {
    access: AccessLayer<Payload>,
    geonet: GeonetLayer,
    cam_last: Option<PositionVector>,
}

struct FrameInFlight {
    payload: Payload,
    receivers: Vec<Receiver>,
}

pub struct World<S: TraceSink> {
    pub fleet: Fleet,
    pub medium: Medium,
    pub sink: S,
    sc: Scenario,
    nodes: Vec<NodeStack>,
    frames: HashMap<u64, FrameInFlight>,
    next_frame: u64,
    backoff_rng: ChaCha12Rng,
    reception_rng: ChaCha12Rng,
}

impl<S: TraceSink> World<S> {
    fn trace(&mut self, t: SimTime, node: NodeId, kind: TraceKind) {
        self.sink.record(&TraceRecord { t, node, kind });
    }

    /// Lets the access layer decide its next move and schedules it.
    fn kick(&mut self, eng: &mut Engine<EventKind>, now: SimTime, node: NodeId) {
        let busy = self.medium.busy_until(node);
        let verdict = self.nodes[node as usize]
            .access
            .kick(now, busy, &mut self.backoff_rng);
        match verdict {
            Verdict::None => {}
            Verdict::WaitGate { at, wait } => {
                self.trace(now, node, TraceKind::GateWait { wait });
                eng.schedule(at, EventKind::DccGateOpen { node });
            }
            Verdict::Attempt { at } => {
                eng.schedule(at, EventKind::TxStart { node });
            }
        }
    }

    fn enqueue_frame(
        &mut self,
        eng: &mut Engine<EventKind>,
        now: SimTime,
        node: NodeId,
        tc: usize,
        payload: Payload,
    ) {
        match self.nodes[node as usize].access.enqueue(tc, payload) {
            Ok(()) => self.kick(eng, now, node),
            Err(_) => self.trace(now, node, TraceKind::QueueDrop { tc }),
        }
    }

    fn process_reception(
        &mut self,
        eng: &mut Engine<EventKind>,
        now: SimTime,
        node: NodeId,
        pkt: &GbcPacket,
    ) {
        let pv = self.fleet.position_at(node, now);
        let release = self.fleet.nodes[node as usize].release;
        let dcc_wait = self.nodes[node as usize]
            .access
            .next_permitted_tx(now)
            .since(now);
        let outcome = self.nodes[node as usize].geonet.on_receive(
            &self.fleet.geo,
            release,
            node,
            &pv,
            pkt,
            dcc_wait,
        );
        let key = pkt.key();
        match outcome {
            RxOutcome::Ignored | RxOutcome::TimerKept => {}
            RxOutcome::CancelTimer { handle } => {
                eng.cancel(handle);
                self.trace(now, node, TraceKind::CbfCancel { msg: key });
            }
            RxOutcome::DplDrop => self.trace(now, node, TraceKind::DplHit { msg: key }),
            RxOutcome::Arm { delay } => {
                self.trace(now, node, TraceKind::RxDelivered { msg: key, pos_x: pv.x });
                let handle = eng.schedule(now + delay, EventKind::CbfTimerExpiry { node, key });
                self.nodes[node as usize].geonet.commit_arm(&key, handle);
                self.trace(now, node, TraceKind::CbfArm { msg: key, timer: delay });
            }
        }
    }

    pub fn dispatch(&mut self, eng: &mut Engine<EventKind>, ev: EventKind) {
        let now = eng.now();
        match ev {
            EventKind::DenmTrigger => {
                eng.schedule(now + self.sc.denm.period, EventKind::DenmTrigger);
                let src = self.fleet.source;
                let pv = self.fleet.position_at(src, now);
                let area = self.fleet.area;
                let pkt =
                    self.nodes[src as usize]
                        .geonet
                        .originate(src, pv, area, self.sc.denm.bytes);
                self.sink
                    .open_message(pkt.key(), now, self.sc.denm.lifetime, &self.fleet);
                let tc = pkt.tc;
                self.enqueue_frame(eng, now, src, tc, Payload::Gbc(pkt));
            }

            EventKind::CamTrigger { node } => {
                eng.schedule(
                    now + self.sc.cam.check_interval,
                    EventKind::CamTrigger { node },
                );
                let pv = self.fleet.position_at(node, now);
                let stack = &self.nodes[node as usize];
                let gate_open = stack.access.next_permitted_tx(now) <= now;
                let moved = match &stack.cam_last {
                    Some(last) => self.fleet.geo.dist(pv.x, pv.y, last.x, last.y),
                    None => 0.0,
                };
                if cam_due(
                    &self.sc.cam,
                    stack.cam_last.as_ref(),
                    now,
                    &pv,
                    moved,
                    gate_open,
                ) {
                    self.nodes[node as usize].cam_last = Some(pv);
                    let (bytes, tc) = (self.sc.cam.bytes, self.sc.cam.tc);
                    self.enqueue_frame(eng, now, node, tc, Payload::Beacon { bytes });
                }
            }

            EventKind::TxStart { node } => {
                if self.medium.is_busy(node, now) {
                    let busy = self.medium.busy_until(node);
                    let at = self.nodes[node as usize].access.redraw_attempt(
                        now,
                        busy,
                        &mut self.backoff_rng,
                    );
                    eng.schedule(at, EventKind::TxStart { node });
                    return;
                }
                let bytes = self.nodes[node as usize]
                    .access
                    .peek_highest()
                    .expect("transmission attempt with empty queues")
                    .0
                    .bytes();
                let airtime = self.medium.cfg.airtime(bytes);
                let (payload, _tc) = self.nodes[node as usize].access.begin_tx(now, airtime);
                let frame = self.next_frame;
                self.next_frame += 1;
                let b = self.medium.broadcast(&self.fleet, frame, node, now, bytes);
                let pos_x = self.fleet.position_at(node, now).x;
                self.trace(
                    now,
                    node,
                    TraceKind::TxStart {
                        msg: payload.key(),
                        pos_x,
                        airtime,
                    },
                );
                eng.schedule(now + airtime, EventKind::TxEnd { node });
                if !b.receivers.is_empty() {
                    eng.schedule(now + airtime + b.prop_max, EventKind::RxEnd { frame });
                    self.frames.insert(
                        frame,
                        FrameInFlight {
                            payload,
                            receivers: b.receivers,
                        },
                    );
                }
            }

            EventKind::TxEnd { node } => {
                self.nodes[node as usize].access.end_tx();
                self.trace(now, node, TraceKind::TxEnd);
                self.kick(eng, now, node);
            }

            EventKind::DccGateOpen { node } => {
                self.nodes[node as usize].access.gate_opened();
                self.kick(eng, now, node);
            }

            EventKind::RxEnd { frame } => {
                let f = self.frames.remove(&frame).expect("unknown frame resolved");
                for r in &f.receivers {
                    let delivered = self.medium.resolve(r.node, frame, &mut self.reception_rng);
                    let Payload::Gbc(pkt) = &f.payload else {
                        continue;
                    };
                    if !delivered {
                        self.trace(now, r.node, TraceKind::RxCollided { msg: pkt.key() });
                        continue;
                    }
                    self.process_reception(eng, now, r.node, pkt);
                }
            }

            EventKind::CbfTimerExpiry { node, key } => {
                let pv = self.fleet.position_at(node, now);
                match self.nodes[node as usize].geonet.timer_expired(&key, pv) {
                    Expiry::HopExhausted => {}
                    Expiry::Forward(pkt) => {
                        self.trace(
                            now,
                            node,
                            TraceKind::CbfForward {
                                msg: key,
                                hop_limit: pkt.hop_limit,
                            },
                        );
                        let tc = pkt.tc;
                        self.enqueue_frame(eng, now, node, tc, Payload::Gbc(pkt));
                    }
                }
            }

            EventKind::CbrWindowEnd => {
                let window = self.sc.access.cbr_window;
                eng.schedule(now + window, EventKind::CbrWindowEnd);
                for n in 0..self.nodes.len() {
                    let busy = self.medium.take_window_busy(n as NodeId, now, window);
                    self.nodes[n].access.cbr_window_update(busy);
                }
            }

            EventKind::MeasurementStart | EventKind::MeasurementEnd => {}
        }
    }
}

pub struct Simulation<S: TraceSink> {
    pub engine: Engine<EventKind>,
    pub world: World<S>,
}

impl<S: TraceSink> Simulation<S> {
    /// Builds the world and schedules the recurring drivers. Beacon checks
    /// are phase-staggered across nodes so 100ms boundaries do not thunder.
    pub fn new(sc: &Scenario, fleet: Fleet, sink: S, rngs: &RngFactory) -> Simulation<S> {
        let n = fleet.len();
        let nodes = (0..n)
            .map(|_| NodeStack {
                access: AccessLayer::new(sc.access.clone()),
                geonet: GeonetLayer::new(sc.cbf.clone()),
                cam_last: None,
            })
            .collect();
        let mut engine = Engine::new();
        engine.schedule(SimTime::ZERO, EventKind::DenmTrigger);
        if sc.cam_enabled {
            let check = sc.cam.check_interval.as_micros();
            for i in 0..n as u64 {
                let phase = SimTime::from_micros(i * check / n as u64);
                engine.schedule(phase, EventKind::CamTrigger { node: i as NodeId });
            }
        }
        engine.schedule(SimTime::ZERO + sc.access.cbr_window, EventKind::CbrWindowEnd);
        engine.schedule(SimTime::ZERO + sc.warmup, EventKind::MeasurementStart);
        engine.schedule(
            SimTime::ZERO + sc.warmup + sc.measure,
            EventKind::MeasurementEnd,
        );
        let world = World {
            medium: Medium::new(n, sc.channel.clone()),
            fleet,
            sink,
            sc: sc.clone(),
            nodes,
            frames: HashMap::new(),
            next_frame: 0,
            backoff_rng: rngs.stream(StreamId::Backoff),
            reception_rng: rngs.stream(StreamId::Reception),
        };
        Simulation { engine, world }
    }

    /// Runs to the scenario horizon. Returns the sink and the horizon.
    pub fn run(self) -> (S, SimTime) {
        let until = SimTime::ZERO + self.world.sc.horizon();
        self.run_to(until)
    }

    pub fn run_to(self, until: SimTime) -> (S, SimTime) {
        let Simulation {
            mut engine,
            mut world,
        } = self;
        engine.run_until(until, |eng, ev| world.dispatch(eng, ev));
        (world.sink, until)
    }
}

/// One full measured run at the given penetration and seed.
pub fn run_one(base: &Scenario, penetration: f64, seed: u64) -> Result<RunMetrics, FleetError> {
    let mut sc = base.clone();
    sc.penetration_r2 = penetration;
    sc.seed = seed;
    let rngs = RngFactory::new(seed);
    let fleet = Fleet::build(
        &sc.highway,
        penetration,
        &mut rngs.stream(StreamId::Placement),
        &mut rngs.stream(StreamId::FleetAssignment),
    )?;
    let collector = MetricsCollector::new(
        &fleet,
        penetration,
        seed,
        SimTime::ZERO + sc.warmup,
        SimTime::ZERO + sc.warmup + sc.measure,
        sc.access.gate_min,
        sc.cbf.dpl_cap,
    );
    let sim = Simulation::new(&sc, fleet, collector, &rngs);
    let (collector, ran_until) = sim.run();
    Ok(collector.finish(ran_until))
}

/// Sweeps penetrations x seeds; each run is independent and seeded on its
/// own, so the sweep parallelizes without affecting results.
pub fn run_experiment(
    base: &Scenario,
    penetrations: &[f64],
    seeds: &[u64],
) -> Result<SweepResults, FleetError> {
    let pairs: Vec<(f64, u64)> = penetrations
        .iter()
        .flat_map(|&p| seeds.iter().map(move |&s| (p, s)))
        .collect();
    let runs = pairs
        .par_iter()
        .map(|&(p, s)| run_one(base, p, s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepResults { runs }.sorted())
}

/// Five stationary stations in a line, fixed zero backoff, beacons off:
/// small enough to check the whole dissemination schedule by hand. The
/// expected outcome is identical for both protocol generations.
pub fn line_probe(release: Release) -> (Scenario, Fleet) {
    let sc = Scenario {
        cam_enabled: false,
        access: AccessConfig {
            cw_override: Some(0),
            ..AccessConfig::default()
        },
        warmup: SimDur::ZERO,
        measure: SimDur::from_millis(300),
        denm: DenmParams {
            lifetime: SimDur::from_millis(100),
            ..DenmParams::default()
        },
        ..Scenario::default()
    };
    let mut fleet = Fleet::line(&[0.0, 300.0, 600.0, 900.0, 1_200.0]);
    fleet.set_release_all(release);
    (sc, fleet)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::VecSink;

    fn tiny_scenario() -> Scenario {
        let mut sc = Scenario::default();
        sc.highway.density_scale = 0.05; // 9 vehicles/lane, 72 moving
        sc.warmup = SimDur::ZERO;
        sc.measure = SimDur::from_secs(2);
        sc.denm.lifetime = SimDur::from_secs(2);
        sc
    }

    #[test]
    fn messages_follow_the_notification_period() {
        let (mut sc, fleet) = line_probe(Release::R1);
        sc.measure = SimDur::from_millis(2_500);
        let rngs = RngFactory::new(1);
        let collector = MetricsCollector::new(
            &fleet,
            0.0,
            1,
            SimTime::ZERO,
            SimTime::ZERO + sc.measure,
            sc.access.gate_min,
            sc.cbf.dpl_cap,
        );
        let sim = Simulation::new(&sc, fleet, collector, &rngs);
        let (collector, until) = sim.run();
        let run = collector.finish(until);
        let sns: Vec<u16> = run.messages.iter().map(|m| m.sn).collect();
        assert_eq!(sns, vec![0, 1, 2], "one message per second from zero");
    }

    #[test]
    fn beacons_are_emitted_but_never_forwarded() {
        let mut sc = tiny_scenario();
        sc.measure = SimDur::from_secs(1);
        sc.denm.lifetime = SimDur::from_secs(1);
        let rngs = RngFactory::new(3);
        let fleet = Fleet::build(
            &sc.highway,
            0.0,
            &mut rngs.stream(StreamId::Placement),
            &mut rngs.stream(StreamId::FleetAssignment),
        )
        .unwrap();
        let sim = Simulation::new(&sc, fleet, VecSink::default(), &rngs);
        let (sink, _) = sim.run();
        let beacon_txs = sink
            .records
            .iter()
            .filter(|r| matches!(r.kind, TraceKind::TxStart { msg: None, .. }))
            .count();
        assert!(beacon_txs > 0, "beacons flowed");
        // Every beacon transmission is by the node that generated it; the
        // only multi-hop traffic carries a message key.
        let forwards = sink
            .records
            .iter()
            .filter(|r| matches!(r.kind, TraceKind::CbfForward { .. }));
        for f in forwards {
            assert!(matches!(f.kind, TraceKind::CbfForward { msg, .. } if msg.src == 0));
        }
    }

    #[test]
    fn saturated_queue_sheds_frames() {
        let (mut sc, fleet) = line_probe(Release::R1);
        // Source fires every 2ms while its gate is shut ~25ms at a stretch:
        // the four-deep queue must overflow.
        sc.denm.period = SimDur::from_millis(2);
        sc.measure = SimDur::from_millis(100);
        sc.denm.lifetime = SimDur::from_millis(10);
        let rngs = RngFactory::new(1);
        let sim = Simulation::new(&sc, fleet, VecSink::default(), &rngs);
        let (sink, _) = sim.run();
        let drops = sink
            .records
            .iter()
            .filter(|r| matches!(r.kind, TraceKind::QueueDrop { .. }))
            .count();
        assert!(drops > 0, "expected overflow drops");
    }

    #[test]
    fn same_seed_reproduces_a_run_exactly() {
        let sc = tiny_scenario();
        let a = run_one(&sc, 0.5, 7).unwrap();
        let b = run_one(&sc, 0.5, 7).unwrap();
        assert_eq!(a.total_tx, b.total_tx);
        assert_eq!(a.total_collisions, b.total_collisions);
        assert_eq!(a.messages.len(), b.messages.len());
        for (ma, mb) in a.messages.iter().zip(&b.messages) {
            assert_eq!(ma.tx_count, mb.tx_count);
            assert_eq!(ma.members_received, mb.members_received);
            assert_eq!(ma.members, mb.members);
        }
        assert_eq!(a.mean_tx(), b.mean_tx());
        assert_eq!(a.mean_pdr(), b.mean_pdr());
    }

    #[test]
    fn different_seeds_change_the_draw() {
        let sc = tiny_scenario();
        let a = run_one(&sc, 0.5, 1).unwrap();
        let b = run_one(&sc, 0.5, 2).unwrap();
        // Extremely unlikely to tie in every observable at once.
        assert!(
            a.total_tx != b.total_tx
                || a.total_collisions != b.total_collisions
                || a.mean_tx() != b.mean_tx()
        );
    }
}
