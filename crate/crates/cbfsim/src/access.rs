//! Channel access: four priority queues, listen-before-talk contention, and a
//! duty-cycle gate that paces transmissions from a smoothed channel-busy
//! ratio.
//!
//! The layer is a passive state machine; the simulation owns the clock and
//! feeds it three stimuli (enqueue, scheduled-attempt fire, gate open) and two
//! transitions (transmission start/end). Every verdict it returns is a time to
//! schedule against, never a side effect.

use std::collections::VecDeque;

use rand::Rng;

use crate::engine::{SimDur, SimTime};

pub const NUM_TCS: usize = 4;

/// (AIFSN, contention window) per traffic class, highest priority first.
pub const TC_PARAMS: [(u64, u32); NUM_TCS] = [(2, 3), (2, 7), (3, 15), (7, 15)];

#[derive(Debug, Clone)]
pub struct AccessConfig {
    pub slot_us: u64,
    pub queue_cap: usize,
    /// Fixed contention window for diagnostics; `None` uses per-TC windows.
    pub cw_override: Option<u32>,
    pub duty_initial: f64,
    pub duty_min: f64,
    pub duty_max: f64,
    pub duty_step: f64,
    pub duty_backoff: f64,
    pub cbr_target: f64,
    pub gate_min: SimDur,
    pub gate_max: SimDur,
    pub cbr_window: SimDur,
}

impl Default for AccessConfig {
    fn default() -> Self {
        AccessConfig {
            slot_us: 13,
            queue_cap: 4,
            cw_override: None,
            duty_initial: 0.03,
            duty_min: 0.0006,
            duty_max: 0.03,
            duty_step: 0.0002,
            duty_backoff: 0.95,
            cbr_target: 0.68,
            gate_min: SimDur::from_millis(25),
            gate_max: SimDur::from_millis(1_000),
            cbr_window: SimDur::from_millis(100),
        }
    }
}

/// Pause the gate imposes after a transmission of the given airtime.
pub fn gate_interval(cfg: &AccessConfig, duty: f64, airtime: SimDur) -> SimDur {
    let raw = (airtime.as_micros() as f64 * (1.0 - duty) / duty).round() as u64;
    SimDur::from_micros(raw.clamp(cfg.gate_min.as_micros(), cfg.gate_max.as_micros()))
}

/// Exponentially smoothed channel-busy ratio: equal weight to the previous
/// estimate and the newest window.
pub fn smooth_cbr(prev: f64, window: f64) -> f64 {
    0.5 * prev + 0.5 * window
}

/// Additive-increase / multiplicative-decrease duty update.
pub fn dcc_update(cfg: &AccessConfig, duty: f64, cbr: f64) -> f64 {
    if cbr < cfg.cbr_target {
        (duty + cfg.duty_step).min(cfg.duty_max)
    } else {
        (duty * cfg.duty_backoff).max(cfg.duty_min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkState {
    Idle,
    WaitGate,
    Contend,
    Transmitting,
}

/// What the caller should schedule after a stimulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    None,
    WaitGate { at: SimTime, wait: SimDur },
    Attempt { at: SimTime },
}

pub struct AccessLayer<T> {
    cfg: AccessConfig,
    queues: [VecDeque<T>; NUM_TCS],
    state: LinkState,
    gate_next: SimTime,
    duty: f64,
    cbr: f64,
}

impl<T> AccessLayer<T> {
    pub fn new(cfg: AccessConfig) -> AccessLayer<T> {
        AccessLayer {
            duty: cfg.duty_initial,
            cfg,
            queues: Default::default(),
            state: LinkState::Idle,
            gate_next: SimTime::ZERO,
            cbr: 0.0,
        }
    }

    pub fn state(&self) -> LinkState {
        self.state
    }

    pub fn duty(&self) -> f64 {
        self.duty
    }

    pub fn cbr(&self) -> f64 {
        self.cbr
    }

    /// Earliest instant the gate lets a new transmission begin.
    pub fn next_permitted_tx(&self, now: SimTime) -> SimTime {
        self.gate_next.max(now)
    }

    pub fn queue_len(&self, tc: usize) -> usize {
        self.queues[tc].len()
    }

    /// Appends to the class queue; a full queue rejects the frame.
    pub fn enqueue(&mut self, tc: usize, item: T) -> Result<(), T> {
        if self.queues[tc].len() >= self.cfg.queue_cap {
            return Err(item);
        }
        self.queues[tc].push_back(item);
        Ok(())
    }

    fn highest_nonempty(&self) -> Option<usize> {
        (0..NUM_TCS).find(|&tc| !self.queues[tc].is_empty())
    }

    /// Frame the next transmission would carry, without removing it.
    pub fn peek_highest(&self) -> Option<(&T, usize)> {
        let tc = self.highest_nonempty()?;
        Some((self.queues[tc].front().unwrap(), tc))
    }

    fn draw_attempt<R: Rng>(&self, tc: usize, earliest: SimTime, rng: &mut R) -> SimTime {
        let (aifsn, cw) = TC_PARAMS[tc];
        let cw = self.cfg.cw_override.unwrap_or(cw);
        let backoff = rng.gen_range(0..=cw) as u64;
        earliest + SimDur::from_micros((aifsn + backoff) * self.cfg.slot_us)
    }

    /// Decides the next move when the link is idle: wait for the gate, or
    /// pick an attempt time after AIFS plus random backoff beyond whatever
    /// the carrier is currently doing.
    pub fn kick<R: Rng>(&mut self, now: SimTime, busy_until: SimTime, rng: &mut R) -> Verdict {
        if self.state != LinkState::Idle {
            return Verdict::None;
        }
        let Some(tc) = self.highest_nonempty() else {
            return Verdict::None;
        };
        if self.gate_next > now {
            self.state = LinkState::WaitGate;
            return Verdict::WaitGate {
                at: self.gate_next,
                wait: self.gate_next.since(now),
            };
        }
        self.state = LinkState::Contend;
        Verdict::Attempt {
            at: self.draw_attempt(tc, busy_until.max(now), rng),
        }
    }

    /// The carrier was busy when the attempt fired: redraw against the new
    /// busy horizon and stay in contention.
    pub fn redraw_attempt<R: Rng>(&mut self, now: SimTime, busy_until: SimTime, rng: &mut R) -> SimTime {
        assert_eq!(self.state, LinkState::Contend);
        let tc = self
            .highest_nonempty()
            .expect("contending with empty queues");
        self.draw_attempt(tc, busy_until.max(now), rng)
    }

    /// Takes the head of the best queue and closes the gate behind it.
    pub fn begin_tx(&mut self, now: SimTime, airtime: SimDur) -> (T, usize) {
        assert_eq!(self.state, LinkState::Contend);
        let tc = self
            .highest_nonempty()
            .expect("transmitting with empty queues");
        let item = self.queues[tc].pop_front().unwrap();
        self.state = LinkState::Transmitting;
        self.gate_next = now + airtime + gate_interval(&self.cfg, self.duty, airtime);
        (item, tc)
    }

    pub fn end_tx(&mut self) {
        assert_eq!(self.state, LinkState::Transmitting);
        self.state = LinkState::Idle;
    }

    /// Gate-open event fired; release the link so the next kick contends.
    pub fn gate_opened(&mut self) {
        if self.state == LinkState::WaitGate {
            self.state = LinkState::Idle;
        }
    }

    /// Folds one measured window into the smoothed ratio and adapts the duty
    /// cycle toward the busy-ratio target.
    pub fn cbr_window_update(&mut self, measured: f64) {
        self.cbr = smooth_cbr(self.cbr, measured);
        self.duty = dcc_update(&self.cfg, self.duty, self.cbr);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::rngs::mock::StepRng;

    fn layer(cw: Option<u32>) -> AccessLayer<u32> {
        AccessLayer::new(AccessConfig {
            cw_override: cw,
            ..AccessConfig::default()
        })
    }

    fn rng() -> StepRng {
        StepRng::new(0, 0)
    }

    #[test]
    fn fifth_frame_overflows_a_class_queue() {
        let mut l = layer(None);
        for i in 0..4 {
            assert!(l.enqueue(0, i).is_ok());
        }
        assert_eq!(l.enqueue(0, 99), Err(99));
        assert_eq!(l.queue_len(0), 4);
    }

    #[test]
    fn attempt_time_is_aifs_plus_backoff_slots() {
        let mut l = layer(Some(0));
        l.enqueue(0, 7).unwrap();
        let v = l.kick(SimTime::ZERO, SimTime::ZERO, &mut rng());
        // AIFSN 2, zero backoff: 26us.
        assert_eq!(
            v,
            Verdict::Attempt {
                at: SimTime::from_micros(26)
            }
        );
        assert_eq!(l.state(), LinkState::Contend);
    }

    #[test]
    fn lowest_priority_class_waits_longest() {
        let mut l = layer(Some(0));
        l.enqueue(3, 7).unwrap();
        let v = l.kick(SimTime::ZERO, SimTime::ZERO, &mut rng());
        // AIFSN 7: 91us.
        assert_eq!(
            v,
            Verdict::Attempt {
                at: SimTime::from_micros(91)
            }
        );
    }

    #[test]
    fn busy_carrier_defers_the_attempt() {
        let mut l = layer(Some(0));
        l.enqueue(0, 7).unwrap();
        let v = l.kick(SimTime::ZERO, SimTime::from_micros(400), &mut rng());
        assert_eq!(
            v,
            Verdict::Attempt {
                at: SimTime::from_micros(426)
            }
        );
    }

    #[test]
    fn closed_gate_parks_the_link() {
        let mut l = layer(Some(0));
        l.enqueue(0, 7).unwrap();
        // Prime the gate by sending one frame.
        let v = l.kick(SimTime::ZERO, SimTime::ZERO, &mut rng());
        let Verdict::Attempt { at } = v else { panic!() };
        let (_, tc) = l.begin_tx(at, SimDur::from_micros(441));
        assert_eq!(tc, 0);
        l.end_tx();
        // 441us airtime at duty 0.03 wants ~14.3ms, clamped up to 25ms.
        assert_eq!(
            l.next_permitted_tx(at).as_micros(),
            at.as_micros() + 441 + 25_000
        );
        l.enqueue(0, 8).unwrap();
        let v2 = l.kick(SimTime::from_micros(500), SimTime::ZERO, &mut rng());
        match v2 {
            Verdict::WaitGate { at: gate, .. } => {
                assert_eq!(gate.as_micros(), 26 + 441 + 25_000);
            }
            other => panic!("expected gate wait, got {other:?}"),
        }
        assert_eq!(l.state(), LinkState::WaitGate);
        l.gate_opened();
        assert_eq!(l.state(), LinkState::Idle);
    }

    #[test]
    fn begin_tx_pops_the_highest_priority_queue() {
        let mut l = layer(Some(0));
        l.enqueue(3, 30).unwrap();
        l.enqueue(0, 10).unwrap();
        l.kick(SimTime::ZERO, SimTime::ZERO, &mut rng());
        let (item, tc) = l.begin_tx(SimTime::from_micros(91), SimDur::from_micros(441));
        assert_eq!((item, tc), (10, 0));
    }

    #[test]
    fn gate_interval_clamps_both_ends() {
        let cfg = AccessConfig::default();
        assert_eq!(
            gate_interval(&cfg, 0.03, SimDur::from_micros(441)),
            SimDur::from_millis(25)
        );
        assert_eq!(
            gate_interval(&cfg, 0.0006, SimDur::from_micros(1_000)),
            SimDur::from_millis(1_000)
        );
        // Mid-range value passes through unclamped: 420us at 0.0006.
        assert_eq!(
            gate_interval(&cfg, 0.0006, SimDur::from_micros(420)),
            SimDur::from_micros(699_580)
        );
    }

    #[test]
    fn cbr_smoothing_blends_half_and_half() {
        assert!((smooth_cbr(0.4, 0.8) - 0.6).abs() < 1e-12);
        assert!((smooth_cbr(0.0, 0.5) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn duty_rises_when_quiet_and_collapses_when_loaded() {
        let cfg = AccessConfig::default();
        assert!((dcc_update(&cfg, 0.01, 0.2) - 0.0102).abs() < 1e-12);
        assert_eq!(dcc_update(&cfg, 0.03, 0.2), 0.03, "capped at max");
        assert!((dcc_update(&cfg, 0.01, 0.9) - 0.0095).abs() < 1e-12);
        assert_eq!(dcc_update(&cfg, 0.0006, 0.9), 0.0006, "floored at min");
    }

    proptest! {
        #[test]
        fn duty_stays_inside_its_bounds(windows in prop::collection::vec(0.0f64..1.0, 1..200)) {
            let cfg = AccessConfig::default();
            let mut duty = cfg.duty_initial;
            let mut cbr = 0.0;
            for w in windows {
                cbr = smooth_cbr(cbr, w);
                duty = dcc_update(&cfg, duty, cbr);
                prop_assert!((cfg.duty_min..=cfg.duty_max).contains(&duty));
            }
        }

        #[test]
        fn backoff_lands_inside_the_contention_window(
            seed in any::<u64>(),
            tc in 0usize..4,
            busy in 0u64..10_000,
        ) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let mut l: AccessLayer<u32> = AccessLayer::new(AccessConfig::default());
            l.enqueue(tc, 1).unwrap();
            let now = SimTime::from_micros(50);
            let v = l.kick(now, SimTime::from_micros(busy), &mut rng);
            let Verdict::Attempt { at } = v else { return Err(TestCaseError::fail("expected attempt")) };
            let (aifsn, cw) = TC_PARAMS[tc];
            let base = now.max(SimTime::from_micros(busy));
            let lo = base + SimDur::from_micros(aifsn * 13);
            let hi = lo + SimDur::from_micros(cw as u64 * 13);
            prop_assert!(at >= lo && at <= hi, "at={at} lo={lo} hi={hi}");
        }

        #[test]
        fn gate_interval_respects_clamps(duty in 0.0006f64..=0.03, airtime_us in 1u64..2_000) {
            let cfg = AccessConfig::default();
            let g = gate_interval(&cfg, duty, SimDur::from_micros(airtime_us));
            prop_assert!(g >= cfg.gate_min && g <= cfg.gate_max);
        }
    }
}
