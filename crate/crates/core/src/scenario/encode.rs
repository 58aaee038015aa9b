//! Fixed-length context encoding consumed by the policy networks.
//!
//! Numeric fields are min-max normalized against [`ContextBounds`];
//! categorical fields are one-hot. Layout:
//!
//! | index | field |
//! |-------|-------|
//! | 0..9  | green, red, offset, speed limit, lane length, grade, age, arrival rate, penetration |
//! | 9..12 | vehicle type one-hot (sedan, suv, truck) |
//! | 12..14| engine type one-hot (ice, hybrid) |

use serde::{Deserialize, Serialize};

use super::context::{Context, EngineType, VehicleType};
use crate::error::{Error, Result};

pub const NUMERIC_CONTEXT_FIELDS: usize = 9;
pub const CONTEXT_DIM: usize = NUMERIC_CONTEXT_FIELDS + 3 + 2;

pub type ContextVector = [f64; CONTEXT_DIM];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Range { min, max }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }
}

/// Normalization bounds for every numeric context field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContextBounds {
    pub green_duration: Range,
    pub red_duration: Range,
    pub signal_offset: Range,
    pub speed_limit: Range,
    pub lane_length: Range,
    pub road_grade: Range,
    pub vehicle_age: Range,
    pub arrival_rate: Range,
    pub av_penetration: Range,
}

impl Default for ContextBounds {
    fn default() -> Self {
        ContextBounds {
            green_duration: Range::new(5.0, 120.0),
            red_duration: Range::new(5.0, 120.0),
            signal_offset: Range::new(0.0, 240.0),
            speed_limit: Range::new(5.0, 35.0),
            lane_length: Range::new(50.0, 1000.0),
            road_grade: Range::new(-0.15, 0.15),
            vehicle_age: Range::new(0.0, 30.0),
            arrival_rate: Range::new(0.0, 1.0),
            av_penetration: Range::new(0.0, 1.0),
        }
    }
}

impl ContextBounds {
    pub fn ranges(&self) -> [(&'static str, Range); NUMERIC_CONTEXT_FIELDS] {
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

    pub fn validate(&self) -> Result<()> {
        for (name, r) in self.ranges() {
            if !(r.min.is_finite() && r.max.is_finite() && r.max > r.min) {
                return Err(Error::invalid(
                    format!("bounds.{name}"),
                    format!("need finite min < max, got [{}, {}]", r.min, r.max),
                ));
            }
        }
        Ok(())
    }

    /// Fails naming the first field of `c` outside its bound.
    pub fn check(&self, c: &Context) -> Result<()> {
        for ((name, v), (_, r)) in c.numeric_fields().iter().zip(self.ranges()) {
            if !r.contains(*v) {
                return Err(Error::invalid(
                    *name,
                    format!("{v} outside normalization bounds [{}, {}]", r.min, r.max),
                ));
            }
        }
        Ok(())
    }
}

pub fn encode_context(c: &Context, bounds: &ContextBounds) -> Result<ContextVector> {
    bounds.check(c)?;
    let mut out = [0.0; CONTEXT_DIM];
    for (i, ((_, v), (_, r))) in c.numeric_fields().iter().zip(bounds.ranges()).enumerate() {
        out[i] = (v - r.min) / (r.max - r.min);
    }
    out[NUMERIC_CONTEXT_FIELDS + c.vehicle_type.ordinal()] = 1.0;
    out[NUMERIC_CONTEXT_FIELDS + VehicleType::ALL.len() + c.engine_type.ordinal()] = 1.0;
    debug_assert_eq!(EngineType::ALL.len(), 2);
    Ok(out)
}
