//! Discrete-event simulator of multi-hop geo-broadcast dissemination in a
//! vehicular network.
//!
//! A parked source on a ring-road shoulder periodically issues hazard
//! notifications addressed to a stretch of highway around it. Every vehicle
//! relays by contention-based forwarding under a duty-cycle-limited MAC,
//! while also beaconing awareness messages that load the shared channel. Two
//! forwarding generations can be mixed in one fleet; the headline experiment
//! sweeps the share of the newer generation and reports transmissions per
//! message and packet delivery ratio.
//!
//! Layering, bottom to top:
//!
//! * [`engine`] — event queue, integer-microsecond clock, seeded RNG streams
//! * [`mobility`] — ring-road fleet, kinematics, destination area
//! * [`channel`] — unit-disk broadcast medium with collisions and busy state
//! * [`access`] — priority queues, backoff, duty-cycle gate, busy-ratio law
//! * [`geonet`] — geo-broadcast forwarding, both generations
//! * [`facilities`] — beacon and notification services
//! * [`sim`] — the assembled machine and experiment sweeps
//! * [`trace`] / [`metrics`] — observation and CSV reporting
//! * [`scenario`] — the run-configuration file format
//!
//! Determinism is a hard guarantee: a (scenario, penetration, seed) triple
//! fixes every event, every draw, and every output byte.

pub mod access;
pub mod channel;
pub mod engine;
pub mod facilities;
pub mod geonet;
pub mod metrics;
pub mod mobility;
pub mod scenario;
pub mod sim;
pub mod trace;

pub use engine::{Engine, EventHandle, RngFactory, SimDur, SimTime, StreamId};
pub use metrics::{MetricsCollector, RunMetrics, SweepResults};
pub use mobility::{Fleet, HighwayConfig, NodeId, Release};
pub use scenario::{Scenario, ScenarioError};
pub use sim::{line_probe, run_experiment, run_one, EventKind, Simulation};
pub use trace::{TraceKind, TraceRecord, TraceSink, VecSink};
