//! Deterministic discrete-event core: an integer-microsecond clock, an event
//! queue ordered by (fire time, insertion sequence), cancellable handles, and
//! seeded per-purpose RNG streams.
//!
//! Everything downstream leans on two properties of this module: events with
//! equal fire times run in insertion order, and a given seed always produces
//! the same stream draws. Keep both intact when touching anything here.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Clock instant, microseconds since run start. The clock is integral on
/// purpose: no accumulation of float error, no platform divergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(u64);

/// Span between two instants, microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimDur(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_micros(us: u64) -> Self {
        SimTime(us)
    }
    pub fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }
    pub fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000)
    }
    pub fn as_micros(self) -> u64 {
        self.0
    }
    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }
    /// Span since an earlier instant. Panics if `earlier` is in the future.
    pub fn since(self, earlier: SimTime) -> SimDur {
        SimDur(self.0.checked_sub(earlier.0).expect("negative time span"))
    }
    pub fn saturating_since(self, other: SimTime) -> SimDur {
        SimDur(self.0.saturating_sub(other.0))
    }
}

impl SimDur {
    pub const ZERO: SimDur = SimDur(0);

    pub fn from_micros(us: u64) -> Self {
        SimDur(us)
    }
    pub fn from_millis(ms: u64) -> Self {
        SimDur(ms * 1_000)
    }
    pub fn from_secs(s: u64) -> Self {
        SimDur(s * 1_000_000)
    }
    pub fn as_micros(self) -> u64 {
        self.0
    }
    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }
}

impl std::ops::Add<SimDur> for SimTime {
    type Output = SimTime;
    fn add(self, d: SimDur) -> SimTime {
        SimTime(self.0 + d.0)
    }
}

impl std::ops::AddAssign<SimDur> for SimTime {
    fn add_assign(&mut self, d: SimDur) {
        self.0 += d.0;
    }
}

impl std::ops::Add for SimDur {
    type Output = SimDur;
    fn add(self, o: SimDur) -> SimDur {
        SimDur(self.0 + o.0)
    }
}

impl std::ops::Sub for SimDur {
    type Output = SimDur;
    fn sub(self, o: SimDur) -> SimDur {
        SimDur(self.0.checked_sub(o.0).expect("negative duration"))
    }
}

impl std::ops::Mul<u64> for SimDur {
    type Output = SimDur;
    fn mul(self, k: u64) -> SimDur {
        SimDur(self.0 * k)
    }
}

impl std::fmt::Display for SimTime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}us", self.0)
    }
}

/// Handle to a scheduled event. Cancellation through a stale handle (already
/// fired or already cancelled) is a no-op that reports `false`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle {
    pub(crate) seq: u64,
}

impl EventHandle {
    /// Placeholder for entries created before their timer is scheduled.
    /// Never matches a live event.
    pub const UNSET: EventHandle = EventHandle { seq: u64::MAX };
}

/// Event queue plus clock. `K` is the per-simulation event payload.
///
/// Ordering contract: strictly by fire time, ties broken by schedule order.
/// Cancelled events stay in the heap and are skipped lazily when popped.
pub struct Engine<K> {
    now: SimTime,
    heap: BinaryHeap<Reverse<(SimTime, u64)>>,
    pending: HashMap<u64, K>,
    next_seq: u64,
}

impl<K> Engine<K> {
    pub fn new() -> Self {
        Engine {
            now: SimTime::ZERO,
            heap: BinaryHeap::new(),
            pending: HashMap::new(),
            next_seq: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending_events(&self) -> usize {
        self.pending.len()
    }

    pub fn schedule(&mut self, at: SimTime, kind: K) -> EventHandle {
        assert!(
            at >= self.now,
            "event scheduled in the past: {} < clock {}",
            at,
            self.now
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse((at, seq)));
        self.pending.insert(seq, kind);
        EventHandle { seq }
    }

    pub fn schedule_in(&mut self, delay: SimDur, kind: K) -> EventHandle {
        self.schedule(self.now + delay, kind)
    }

    /// True iff the event was still pending and is now cancelled.
    pub fn cancel(&mut self, h: EventHandle) -> bool {
        self.pending.remove(&h.seq).is_some()
    }

    fn pop_due(&mut self, until: SimTime) -> Option<K> {
        while let Some(&Reverse((at, seq))) = self.heap.peek() {
            if at > until {
                break;
            }
            self.heap.pop();
            if let Some(kind) = self.pending.remove(&seq) {
                self.now = at;
                return Some(kind);
            }
            // cancelled: skip
        }
        None
    }

    /// Process every event with fire time <= `until` (including ones scheduled
    /// while running), leave the clock at `until`, and return the number of
    /// events executed.
    pub fn run_until<F>(&mut self, until: SimTime, mut handler: F) -> u64
    where
        F: FnMut(&mut Self, K),
    {
        assert!(until >= self.now, "run_until target behind clock");
        let mut processed = 0;
        while let Some(kind) = self.pop_due(until) {
            handler(self, kind);
            processed += 1;
        }
        self.now = until;
        processed
    }
}

impl<K> Default for Engine<K> {
    fn default() -> Self {
        Self::new()
    }
}

/// Named RNG streams. One stream per purpose: adding a consumer to one stream
/// never perturbs draws on another, so fleet layout is stable across protocol
/// changes and vice versa.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamId {
    Placement = 0,
    FleetAssignment = 1,
    Backoff = 2,
    Reception = 3,
}

/// Derives independent deterministic generators from one run seed.
#[derive(Debug, Clone, Copy)]
pub struct RngFactory {
    seed: u64,
}

impl RngFactory {
    pub fn new(seed: u64) -> Self {
        RngFactory { seed }
    }

    pub fn stream(&self, id: StreamId) -> ChaCha12Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8] = id as u8;
        key[9..25].copy_from_slice(b"cbfsim-streams-1");
        ChaCha12Rng::from_seed(key)
    }
}
