//! Message services above the network layer.
//!
//! Awareness beacons (single-hop, never forwarded) are triggered by movement
//! deltas against the last beacon actually sent, re-checked on a fixed
//! cadence, and skipped entirely while the transmit gate is shut. The hazard
//! notification service at the source is simpler: a fixed-size packet on a
//! fixed period, each repetition a fresh message.

use crate::engine::{SimDur, SimTime};
use crate::mobility::PositionVector;

#[derive(Debug, Clone)]
pub struct CamParams {
    /// Cadence at which the trigger conditions are re-evaluated.
    pub check_interval: SimDur,
    /// Two beacons never closer together than this.
    pub min_interval: SimDur,
    /// A beacon at least this often, movement or not.
    pub max_interval: SimDur,
    pub pos_threshold_m: f64,
    pub speed_threshold_mps: f64,
    pub heading_threshold_deg: f64,
    pub bytes: u32,
    pub tc: usize,
}

impl Default for CamParams {
    fn default() -> Self {
        CamParams {
            check_interval: SimDur::from_millis(100),
            min_interval: SimDur::from_millis(100),
            max_interval: SimDur::from_secs(1),
            pos_threshold_m: 4.0,
            speed_threshold_mps: 0.5,
            heading_threshold_deg: 4.0,
            bytes: 285,
            tc: 2,
        }
    }
}

fn heading_deg(h: f64) -> f64 {
    if h < 0.0 {
        180.0
    } else {
        0.0
    }
}

/// Should a beacon go out now? `last` is the state advertised by the previous
/// beacon (`None` before the first), `dist_moved_m` the along-road distance
/// since then, and `gate_open` whether the access layer would accept a frame
/// this instant. A shut gate suppresses the beacon outright — it is not
/// queued for later.
pub fn cam_due(
    p: &CamParams,
    last: Option<&PositionVector>,
    now: SimTime,
    current: &PositionVector,
    dist_moved_m: f64,
    gate_open: bool,
) -> bool {
    if !gate_open {
        return false;
    }
    let Some(last) = last else {
        return true;
    };
    let dt = now.since(last.at);
    if dt >= p.max_interval {
        return true;
    }
    if dt < p.min_interval {
        return false;
    }
    dist_moved_m >= p.pos_threshold_m
        || (current.speed - last.speed).abs() >= p.speed_threshold_mps
        || (heading_deg(current.heading) - heading_deg(last.heading)).abs()
            >= p.heading_threshold_deg
}

#[derive(Debug, Clone)]
pub struct DenmParams {
    pub period: SimDur,
    pub bytes: u32,
    /// How long each message stays relevant to late receivers.
    pub lifetime: SimDur,
}

impl Default for DenmParams {
    fn default() -> Self {
        DenmParams {
            period: SimDur::from_secs(1),
            bytes: 301,
            lifetime: SimDur::from_secs(10),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(at: SimTime, speed: f64, heading: f64) -> PositionVector {
        PositionVector {
            x: 0.0,
            y: 0.0,
            speed,
            heading,
            at,
        }
    }

    fn p() -> CamParams {
        CamParams::default()
    }

    #[test]
    fn first_check_beacons_immediately() {
        let cur = pv(SimTime::ZERO, 30.0, 1.0);
        assert!(cam_due(&p(), None, SimTime::ZERO, &cur, 0.0, true));
    }

    #[test]
    fn shut_gate_suppresses_even_an_overdue_beacon() {
        let last = pv(SimTime::ZERO, 30.0, 1.0);
        let cur = pv(SimTime::from_secs(5), 30.0, 1.0);
        assert!(!cam_due(&p(), Some(&last), SimTime::from_secs(5), &cur, 200.0, false));
        assert!(!cam_due(&p(), None, SimTime::ZERO, &cur, 0.0, false));
    }

    #[test]
    fn keepalive_fires_at_the_max_interval() {
        let last = pv(SimTime::ZERO, 0.0, 1.0);
        let cur = pv(SimTime::from_secs(1), 0.0, 1.0);
        assert!(cam_due(&p(), Some(&last), SimTime::from_secs(1), &cur, 0.0, true));
        let early = pv(SimTime::from_millis(900), 0.0, 1.0);
        assert!(!cam_due(
            &p(),
            Some(&last),
            SimTime::from_millis(900),
            &early,
            0.0,
            true
        ));
    }

    #[test]
    fn position_threshold_is_four_meters() {
        let last = pv(SimTime::ZERO, 30.0, 1.0);
        let now = SimTime::from_millis(200);
        let cur = pv(now, 30.0, 1.0);
        assert!(cam_due(&p(), Some(&last), now, &cur, 4.0, true));
        assert!(!cam_due(&p(), Some(&last), now, &cur, 3.9, true));
    }

    #[test]
    fn speed_and_heading_deltas_trigger() {
        let last = pv(SimTime::ZERO, 30.0, 1.0);
        let now = SimTime::from_millis(200);
        let faster = pv(now, 30.5, 1.0);
        assert!(cam_due(&p(), Some(&last), now, &faster, 0.0, true));
        let slower = pv(now, 30.4, 1.0);
        assert!(!cam_due(&p(), Some(&last), now, &slower, 0.0, true));
        let reversed = pv(now, 30.0, -1.0);
        assert!(cam_due(&p(), Some(&last), now, &reversed, 0.0, true));
    }

    #[test]
    fn min_interval_blanks_movement_triggers() {
        let last = pv(SimTime::ZERO, 30.0, 1.0);
        let now = SimTime::from_millis(99);
        let cur = pv(now, 35.0, 1.0);
        assert!(!cam_due(&p(), Some(&last), now, &cur, 50.0, true));
    }
}
