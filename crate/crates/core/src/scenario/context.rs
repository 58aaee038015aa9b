use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleType {
    Sedan,
    Suv,
    Truck,
}

impl VehicleType {
    pub const ALL: [VehicleType; 3] = [VehicleType::Sedan, VehicleType::Suv, VehicleType::Truck];

    pub fn ordinal(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineType {
    Ice,
    Hybrid,
}

impl EngineType {
    pub const ALL: [EngineType; 2] = [EngineType::Ice, EngineType::Hybrid];

    pub fn ordinal(self) -> usize {
        self as usize
    }
}

/// Static parameters of one traffic scenario.
///
/// Units: seconds for signal timing, m/s for speeds, metres for lengths,
/// vehicles per second for demand. `road_grade` is a slope fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Context {
    pub green_duration: f64,
    pub red_duration: f64,
    /// Position inside the signal cycle at t = 0. Zero starts at the
    /// beginning of green.
    pub signal_offset: f64,
    pub speed_limit: f64,
    pub lane_length: f64,
    pub road_grade: f64,
    pub vehicle_type: VehicleType,
    pub engine_type: EngineType,
    pub vehicle_age: f64,
    pub arrival_rate: f64,
    pub av_penetration: f64,
}

pub const MAX_ROAD_GRADE: f64 = 0.15;

impl Context {
    pub fn cycle(&self) -> f64 {
        self.green_duration + self.red_duration
    }

    pub fn validate(&self) -> Result<()> {
        fn finite(field: &str, v: f64) -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(field, format!("must be finite, got {v}")))
            }
        }
        for (name, v) in self.numeric_fields() {
            finite(name, v)?;
        }
        if self.green_duration <= 0.0 {
            return Err(Error::invalid("green_duration", "must be > 0"));
        }
        if self.red_duration <= 0.0 {
            return Err(Error::invalid("red_duration", "must be > 0"));
        }
        if self.signal_offset < 0.0 || self.signal_offset >= self.cycle() {
            return Err(Error::invalid(
                "signal_offset",
                format!("must lie in [0, {}), got {}", self.cycle(), self.signal_offset),
            ));
        }
        if self.speed_limit <= 0.0 {
            return Err(Error::invalid("speed_limit", "must be > 0"));
        }
        if self.lane_length <= 0.0 {
            return Err(Error::invalid("lane_length", "must be > 0"));
        }
        if !(-MAX_ROAD_GRADE..=MAX_ROAD_GRADE).contains(&self.road_grade) {
            return Err(Error::invalid(
                "road_grade",
                format!("must lie in [-0.15, 0.15], got {}", self.road_grade),
            ));
        }
        if self.vehicle_age < 0.0 {
            return Err(Error::invalid("vehicle_age", "must be >= 0"));
        }
        if self.arrival_rate < 0.0 {
            return Err(Error::invalid("arrival_rate", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.av_penetration) {
            return Err(Error::invalid(
                "av_penetration",
                format!("must lie in [0, 1], got {}", self.av_penetration),
            ));
        }
        Ok(())
    }

    /// Numeric fields in encoding order.
    pub fn numeric_fields(&self) -> [(&'static str, f64); 9] {
        [
            ("green_duration", self.green_duration),
            ("red_duration", self.red_duration),
            ("signal_offset", self.signal_offset),
            ("speed_limit", self.speed_limit),
            ("lane_length", self.lane_length),
            ("road_grade", self.road_grade),
            ("vehicle_age", self.vehicle_age),
            ("arrival_rate", self.arrival_rate),
            ("av_penetration", self.av_penetration),
        ]
    }
}

impl Default for Context {
    fn default() -> Self {
        Context {
            green_duration: 30.0,
            red_duration: 30.0,
            signal_offset: 0.0,
            speed_limit: 15.0,
            lane_length: 300.0,
            road_grade: 0.0,
            vehicle_type: VehicleType::Sedan,
            engine_type: EngineType::Ice,
            vehicle_age: 0.0,
            arrival_rate: 0.1,
            av_penetration: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleClass {
    Human,
    Av,
}

impl VehicleClass {
    pub fn as_str(self) -> &'static str {
        match self {
            VehicleClass::Human => "human",
            VehicleClass::Av => "av",
        }
    }
}

/// One pre-scheduled arrival. When a scenario lists any of these the
/// random demand process is switched off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedArrival {
    pub time: f64,
    pub class: VehicleClass,
}

/// One episode of one context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub horizon: f64,
    pub dt: f64,
    pub context: Context,
    #[serde(default, rename = "arrival", skip_serializing_if = "Vec::is_empty")]
    pub arrivals: Vec<ScriptedArrival>,
}

impl ScenarioSpec {
    pub fn new(context: Context, seed: u64, horizon: f64, dt: f64) -> Self {
        ScenarioSpec {
            seed,
            horizon,
            dt,
            context,
            arrivals: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.context.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt", "must be > 0"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid("horizon", "must be > 0"));
        }
        let ratio = self.horizon / self.dt;
        if (ratio - ratio.round()).abs() > 1e-6 * ratio.max(1.0) {
            return Err(Error::invalid(
                "horizon",
                format!("horizon/dt = {ratio} is not a whole number of steps"),
            ));
        }
        for (i, a) in self.arrivals.iter().enumerate() {
            if !(a.time >= 0.0 && a.time < self.horizon) {
                return Err(Error::invalid(
                    format!("arrival[{i}].time"),
                    format!("must lie in [0, horizon), got {}", a.time),
                ));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}
