//! Highway fleet and kinematics.
//!
//! The road is a ring: vehicles that pass the end reappear at the start, so
//! lane density is conserved for arbitrarily long runs without spawn/despawn
//! machinery. All along-road arithmetic (distances, area membership, offsets
//! from the source) folds across the seam.

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::engine::SimTime;

pub type NodeId = u32;

/// Protocol behavior generation a node runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Release {
    R1,
    R2,
}

/// Along-road geometry helper. `ring_len` is the road circumference in meters.
#[derive(Debug, Clone, Copy)]
pub struct Geometry {
    pub ring_len: f64,
}

impl Geometry {
    /// Shortest along-road separation, in [0, ring_len/2].
    pub fn ring_dx(&self, xa: f64, xb: f64) -> f64 {
        let d = (xa - xb).abs();
        d.min(self.ring_len - d)
    }

    /// Signed along-road offset of `x` from `from`, folded to
    /// [-ring_len/2, ring_len/2).
    pub fn signed_delta(&self, x: f64, from: f64) -> f64 {
        let half = self.ring_len / 2.0;
        let mut d = (x - from).rem_euclid(self.ring_len);
        if d >= half {
            d -= self.ring_len;
        }
        d
    }

    pub fn dist2(&self, xa: f64, ya: f64, xb: f64, yb: f64) -> f64 {
        let dx = self.ring_dx(xa, xb);
        let dy = ya - yb;
        dx * dx + dy * dy
    }

    pub fn dist(&self, xa: f64, ya: f64, xb: f64, yb: f64) -> f64 {
        self.dist2(xa, ya, xb, yb).sqrt()
    }
}

/// Geo-addressed rectangle, closed on its boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DestinationArea {
    pub center_x: f64,
    pub center_y: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl DestinationArea {
    pub fn contains(&self, geo: &Geometry, x: f64, y: f64) -> bool {
        geo.ring_dx(x, self.center_x) <= self.half_length
            && (y - self.center_y).abs() <= self.half_width
    }
}

/// Kinematic state snapshot of one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionVector {
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    /// +1.0 along increasing x, -1.0 opposite. Vehicles never turn.
    pub heading: f64,
    pub at: SimTime,
}

#[derive(Debug, Clone, Copy)]
pub struct VehicleNode {
    pub id: NodeId,
    /// Lane index within its direction; `SHOULDER` for the parked source.
    pub lane: u8,
    pub release: Release,
    pub stationary: bool,
}

pub const SHOULDER: u8 = u8::MAX;

#[derive(Debug, Clone, Copy)]
struct Kin {
    x0: f64,
    y: f64,
    /// Signed speed, m/s (heading folded in).
    v: f64,
}

#[derive(Debug, Clone)]
pub struct HighwayConfig {
    pub lanes_per_direction: u32,
    /// Vehicles per km per lane before `density_scale`.
    pub density_per_lane_km: f64,
    pub road_length_m: f64,
    pub area_length_m: f64,
    pub lane_width_m: f64,
    /// Per-lane speeds, km/h, outermost lane first; mirrored per direction.
    pub speeds_kmh: Vec<f64>,
    pub density_scale: f64,
}

impl Default for HighwayConfig {
    fn default() -> Self {
        HighwayConfig {
            lanes_per_direction: 4,
            density_per_lane_km: 30.0,
            road_length_m: 6_000.0,
            area_length_m: 4_000.0,
            lane_width_m: 3.5,
            speeds_kmh: vec![110.0, 100.0, 90.0, 80.0],
            density_scale: 1.0,
        }
    }
}

#[derive(Debug, Error)]
pub enum FleetError {
    #[error("highway.{field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

/// The full node population: one parked source on the shoulder at the area
/// center plus the moving fleet. Node 0 is always the source.
#[derive(Debug, Clone)]
pub struct Fleet {
    pub nodes: Vec<VehicleNode>,
    kin: Vec<Kin>,
    pub geo: Geometry,
    pub area: DestinationArea,
    pub source: NodeId,
}

impl Fleet {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn position_at(&self, n: NodeId, t: SimTime) -> PositionVector {
        let k = &self.kin[n as usize];
        let x = (k.x0 + k.v * t.as_secs_f64()).rem_euclid(self.geo.ring_len);
        PositionVector {
            x,
            y: k.y,
            speed: k.v.abs(),
            heading: if k.v < 0.0 { -1.0 } else { 1.0 },
            at: t,
        }
    }

    pub fn in_area_at(&self, n: NodeId, t: SimTime) -> bool {
        let pv = self.position_at(n, t);
        self.area.contains(&self.geo, pv.x, pv.y)
    }

    /// Builds the default highway population: per-lane jittered-lattice
    /// placement (uniform offset inside equal slots, so any window of the road
    /// holds the nominal count ± 1 per lane), per-lane constant speeds, both
    /// directions, and the parked source at the area center.
    pub fn build<R: Rng, A: Rng>(
        cfg: &HighwayConfig,
        penetration_r2: f64,
        placement: &mut R,
        assignment: &mut A,
    ) -> Result<Fleet, FleetError> {
        if cfg.lanes_per_direction == 0 {
            return Err(FleetError::Invalid {
                field: "lanes_per_direction",
                reason: "must be at least 1".into(),
            });
        }
        if cfg.speeds_kmh.len() != cfg.lanes_per_direction as usize {
            return Err(FleetError::Invalid {
                field: "speeds_kmh",
                reason: format!(
                    "expected {} per-lane speeds, got {}",
                    cfg.lanes_per_direction,
                    cfg.speeds_kmh.len()
                ),
            });
        }
        if !(0.0..=1.0).contains(&penetration_r2) {
            return Err(FleetError::Invalid {
                field: "penetration_r2",
                reason: format!("{penetration_r2} outside [0, 1]"),
            });
        }
        if cfg.area_length_m > cfg.road_length_m {
            return Err(FleetError::Invalid {
                field: "area_length_m",
                reason: "destination area longer than the road".into(),
            });
        }
        let per_lane = (cfg.density_per_lane_km * cfg.road_length_m / 1_000.0
            * cfg.density_scale)
            .round() as u64;
        if per_lane == 0 {
            return Err(FleetError::Invalid {
                field: "density_scale",
                reason: "configuration yields zero vehicles per lane".into(),
            });
        }

        let geo = Geometry {
            ring_len: cfg.road_length_m,
        };
        let lanes_w = cfg.lanes_per_direction as f64 * cfg.lane_width_m;
        let area = DestinationArea {
            center_x: cfg.road_length_m / 2.0,
            center_y: 0.0,
            half_length: cfg.area_length_m / 2.0,
            half_width: lanes_w + 5.0,
        };

        let mut nodes = Vec::new();
        let mut kin = Vec::new();

        // Source first: parked on the shoulder beside the +x carriageway.
        nodes.push(VehicleNode {
            id: 0,
            lane: SHOULDER,
            release: Release::R1,
            stationary: true,
        });
        kin.push(Kin {
            x0: area.center_x,
            y: lanes_w + 2.0,
            v: 0.0,
        });

        for (dir_sign, y_sign) in [(1.0f64, 1.0f64), (-1.0, -1.0)] {
            for lane in 0..cfg.lanes_per_direction {
                let speed = cfg.speeds_kmh[lane as usize] / 3.6;
                let y = y_sign * (lane as f64 + 0.5) * cfg.lane_width_m;
                let spacing = cfg.road_length_m / per_lane as f64;
                for slot in 0..per_lane {
                    let jitter: f64 = placement.gen::<f64>();
                    let x0 = ((slot as f64 + jitter) * spacing).rem_euclid(cfg.road_length_m);
                    let id = nodes.len() as NodeId;
                    nodes.push(VehicleNode {
                        id,
                        lane: lane as u8,
                        release: Release::R1,
                        stationary: false,
                    });
                    kin.push(Kin {
                        x0,
                        y,
                        v: dir_sign * speed,
                    });
                }
            }
        }

        assign_releases(&mut nodes, penetration_r2, assignment);

        Ok(Fleet {
            nodes,
            kin,
            geo,
            area,
            source: 0,
        })
    }

    /// Static test/diagnostic population: stationary nodes at given x
    /// positions on an effectively straight road, node 0 the source, area
    /// centered on it.
    pub fn line(xs: &[f64]) -> Fleet {
        let ring = 1_000_000.0;
        let geo = Geometry { ring_len: ring };
        let area = DestinationArea {
            center_x: xs[0].rem_euclid(ring),
            center_y: 0.0,
            half_length: 2_000.0,
            half_width: 50.0,
        };
        let nodes = (0..xs.len())
            .map(|i| VehicleNode {
                id: i as NodeId,
                lane: SHOULDER,
                release: Release::R1,
                stationary: true,
            })
            .collect();
        let kin = xs
            .iter()
            .map(|&x| Kin {
                x0: x.rem_euclid(ring),
                y: 0.0,
                v: 0.0,
            })
            .collect();
        Fleet {
            nodes,
            kin,
            geo,
            area,
            source: 0,
        }
    }

    pub fn set_release_all(&mut self, r: Release) {
        for n in &mut self.nodes {
            n.release = r;
        }
    }

    pub fn moving_count(&self) -> usize {
        self.nodes.iter().filter(|n| !n.stationary).count()
    }
}

/// Marks exactly `round(N * penetration)` of `nodes` as R2, drawn by seeded
/// shuffle; the rest stay R1. Exact counts, never probabilistic.
pub fn assign_releases<R: Rng>(nodes: &mut [VehicleNode], penetration_r2: f64, rng: &mut R) {
    for n in nodes.iter_mut() {
        n.release = Release::R1;
    }
    let want = (nodes.len() as f64 * penetration_r2).round() as usize;
    let mut idx: Vec<usize> = (0..nodes.len()).collect();
    idx.shuffle(rng);
    for &i in idx.iter().take(want) {
        nodes[i].release = Release::R2;
    }
}
