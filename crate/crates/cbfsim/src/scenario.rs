//! Scenario files: flat `section.key = value` text.
//!
//! Blank lines and `#` comments are ignored; an empty file is exactly the
//! default configuration. Unknown keys and malformed values are errors that
//! name the offending line and setting, and a final validation pass checks
//! cross-field consistency.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::access::AccessConfig;
use crate::channel::{ChannelConfig, DeliveryCurve};
use crate::engine::SimDur;
use crate::facilities::{CamParams, DenmParams};
use crate::geonet::CbfParams;
use crate::mobility::HighwayConfig;

#[derive(Debug, Clone)]
pub struct Scenario {
    pub highway: HighwayConfig,
    pub penetration_r2: f64,
    pub seed: u64,
    pub warmup: SimDur,
    pub measure: SimDur,
    pub channel: ChannelConfig,
    pub access: AccessConfig,
    pub cbf: CbfParams,
    pub cam: CamParams,
    pub cam_enabled: bool,
    pub denm: DenmParams,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            highway: HighwayConfig::default(),
            penetration_r2: 0.0,
            seed: 1,
            warmup: SimDur::from_secs(120),
            measure: SimDur::from_secs(30),
            channel: ChannelConfig::default(),
            access: AccessConfig::default(),
            cbf: CbfParams::default(),
            cam: CamParams::default(),
            cam_enabled: true,
            denm: DenmParams::default(),
        }
    }
}

impl Scenario {
    /// End of simulated time: the last measured message still gets its whole
    /// lifetime on air.
    pub fn horizon(&self) -> SimDur {
        self.warmup + self.measure + self.denm.lifetime
    }

    pub fn from_file(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = fs::read_to_string(path)?;
        Scenario::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let mut sc = Scenario::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ScenarioError::Syntax { line: line_no });
            };
            let key = key.trim();
            let value = value.trim();
            sc.set(key, value).map_err(|e| match e {
                SetError::Unknown => ScenarioError::UnknownKey {
                    line: line_no,
                    key: key.to_string(),
                },
                SetError::Bad(msg) => ScenarioError::BadValue {
                    line: line_no,
                    key: key.to_string(),
                    msg,
                },
            })?;
        }
        sc.validate()?;
        Ok(sc)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), SetError> {
        match key {
            "highway.lanes_per_direction" => self.highway.lanes_per_direction = num(v)?,
            "highway.density_per_lane_km" => self.highway.density_per_lane_km = num(v)?,
            "highway.road_length_m" => self.highway.road_length_m = num(v)?,
            "highway.area_length_m" => self.highway.area_length_m = num(v)?,
            "highway.lane_width_m" => self.highway.lane_width_m = num(v)?,
            "highway.speeds_kmh" => self.highway.speeds_kmh = num_list(v)?,
            "highway.density_scale" => self.highway.density_scale = num(v)?,
            "fleet.penetration_r2" => self.penetration_r2 = num(v)?,
            "run.seed" => self.seed = num(v)?,
            "run.warmup_s" => self.warmup = secs(v)?,
            "run.measure_s" => self.measure = secs(v)?,
            "channel.max_range_m" => self.channel.max_range_m = num(v)?,
            "channel.data_rate_bps" => self.channel.data_rate_bps = num(v)?,
            "channel.preamble_us" => self.channel.preamble_us = num(v)?,
            "channel.delivery_curve" => self.channel.delivery_curve = Some(curve(v)?),
            "access.slot_us" => self.access.slot_us = num(v)?,
            "access.queue_cap" => self.access.queue_cap = num(v)?,
            "access.cw_override" => self.access.cw_override = Some(num(v)?),
            "access.duty_initial" => self.access.duty_initial = num(v)?,
            "access.duty_min" => self.access.duty_min = num(v)?,
            "access.duty_max" => self.access.duty_max = num(v)?,
            "access.duty_step" => self.access.duty_step = num(v)?,
            "access.duty_backoff" => self.access.duty_backoff = num(v)?,
            "access.cbr_target" => self.access.cbr_target = num(v)?,
            "access.gate_min_ms" => self.access.gate_min = millis(v)?,
            "access.gate_max_ms" => self.access.gate_max = millis(v)?,
            "access.cbr_window_ms" => self.access.cbr_window = millis(v)?,
            "cbf.to_max_ms" => self.cbf.to_max = millis(v)?,
            "cbf.to_min_ms" => self.cbf.to_min = millis(v)?,
            "cbf.dist_max_m" => self.cbf.dist_max = num(v)?,
            "cbf.dpl_cap" => self.cbf.dpl_cap = num(v)?,
            "cam.enabled" => self.cam_enabled = boolean(v)?,
            "cam.check_interval_ms" => self.cam.check_interval = millis(v)?,
            "cam.min_interval_ms" => self.cam.min_interval = millis(v)?,
            "cam.max_interval_ms" => self.cam.max_interval = millis(v)?,
            "cam.pos_threshold_m" => self.cam.pos_threshold_m = num(v)?,
            "cam.speed_threshold_mps" => self.cam.speed_threshold_mps = num(v)?,
            "cam.heading_threshold_deg" => self.cam.heading_threshold_deg = num(v)?,
            "cam.bytes" => self.cam.bytes = num(v)?,
            "cam.tc" => self.cam.tc = num(v)?,
            "denm.period_ms" => self.denm.period = millis(v)?,
            "denm.bytes" => self.denm.bytes = num(v)?,
            "denm.lifetime_s" => self.denm.lifetime = secs(v)?,
            _ => return Err(SetError::Unknown),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |field: &'static str, reason: String| ScenarioError::Invalid { field, reason };
        if !(0.0..=1.0).contains(&self.penetration_r2) {
            return Err(bad(
                "fleet.penetration_r2",
                format!("{} outside [0, 1]", self.penetration_r2),
            ));
        }
        if self.measure.as_micros() == 0 {
            return Err(bad("run.measure_s", "must be positive".into()));
        }
        if self.channel.data_rate_bps == 0 {
            return Err(bad("channel.data_rate_bps", "must be positive".into()));
        }
        if self.access.slot_us == 0 {
            return Err(bad("access.slot_us", "must be positive".into()));
        }
        if self.access.queue_cap == 0 {
            return Err(bad("access.queue_cap", "must be at least 1".into()));
        }
        if self.access.duty_min > self.access.duty_max {
            return Err(bad(
                "access.duty_min",
                format!(
                    "{} exceeds access.duty_max {}",
                    self.access.duty_min, self.access.duty_max
                ),
            ));
        }
        if self.access.duty_initial < self.access.duty_min
            || self.access.duty_initial > self.access.duty_max
        {
            return Err(bad(
                "access.duty_initial",
                format!("{} outside the duty bounds", self.access.duty_initial),
            ));
        }
        if self.access.gate_min > self.access.gate_max {
            return Err(bad("access.gate_min_ms", "exceeds access.gate_max_ms".into()));
        }
        if self.cbf.to_min > self.cbf.to_max {
            return Err(bad("cbf.to_min_ms", "exceeds cbf.to_max_ms".into()));
        }
        if self.cbf.dist_max <= 0.0 {
            return Err(bad("cbf.dist_max_m", "must be positive".into()));
        }
        if self.cam.tc > 3 {
            return Err(bad("cam.tc", format!("{} outside 0..=3", self.cam.tc)));
        }
        if self.denm.period.as_micros() == 0 {
            return Err(bad("denm.period_ms", "must be positive".into()));
        }
        if let Some(c) = &self.channel.delivery_curve {
            let increasing = c.points.windows(2).all(|w| w[0].0 < w[1].0);
            if c.points.is_empty() || !increasing {
                return Err(bad(
                    "channel.delivery_curve",
                    "needs strictly increasing distances".into(),
                ));
            }
            if c.points.iter().any(|&(_, p)| !(0.0..=1.0).contains(&p)) {
                return Err(bad(
                    "channel.delivery_curve",
                    "probabilities must lie in [0, 1]".into(),
                ));
            }
        }
        Ok(())
    }
}

enum SetError {
    Unknown,
    Bad(String),
}

impl From<String> for SetError {
    fn from(msg: String) -> SetError {
        SetError::Bad(msg)
    }
}

fn num<T: std::str::FromStr>(v: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e| format!("{e}"))
}

fn num_list(v: &str) -> Result<Vec<f64>, String> {
    v.split(',').map(|s| num(s.trim())).collect()
}

fn boolean(v: &str) -> Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(format!("expected true or false, got `{other}`")),
    }
}

fn millis(v: &str) -> Result<SimDur, String> {
    Ok(SimDur::from_millis(num(v)?))
}

fn secs(v: &str) -> Result<SimDur, String> {
    let s: f64 = num(v)?;
    if s.is_nan() || s < 0.0 {
        return Err(format!("{s} is not a non-negative duration"));
    }
    Ok(SimDur::from_micros((s * 1_000_000.0).round() as u64))
}

fn curve(v: &str) -> Result<DeliveryCurve, String> {
    let mut points = Vec::new();
    for part in v.split(',') {
        let (d, p) = part
            .trim()
            .split_once(':')
            .ok_or_else(|| format!("expected `distance:probability`, got `{part}`"))?;
        points.push((num(d.trim())?, num(p.trim())?));
    }
    Ok(DeliveryCurve { points })
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: expected `section.key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown setting `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}`: {msg}")]
    BadValue { line: usize, key: String, msg: String },
    #[error("`{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}
