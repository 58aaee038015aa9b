//! Instantaneous emission surrogate.
//!
//! A VT-micro-style power model with a positive idle floor. Coefficients are
//! shipped in `data/emission_coefficients.toml`; see that file for the
//! formula.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{Context, EngineType, VehicleType};

const COEFFICIENT_TABLE: &str = include_str!("../../data/emission_coefficients.toml");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleTypeFactors {
    pub sedan: f64,
    pub suv: f64,
    pub truck: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineTypeFactors {
    pub ice: f64,
    pub hybrid: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionModel {
    pub schema_version: u32,
    pub idle: f64,
    pub power_gain: f64,
    pub accel_gain: f64,
    pub rolling: f64,
    pub aero: f64,
    pub gravity: f64,
    pub grade_gain: f64,
    pub age_gain: f64,
    pub vehicle_type: VehicleTypeFactors,
    pub engine_type: EngineTypeFactors,
}

impl EmissionModel {
    pub fn parse(text: &str) -> Result<Self> {
        let m: EmissionModel =
            toml::from_str(text).map_err(|e| Error::invalid("emission table", e.message().to_string()))?;
        if m.schema_version != 1 {
            return Err(Error::invalid("emission table.schema_version", "expected 1"));
        }
        if !(m.idle > 0.0) {
            return Err(Error::invalid("emission table.idle", "idle floor must be > 0"));
        }
        if m.engine_type.hybrid >= m.engine_type.ice {
            return Err(Error::invalid(
                "emission table.engine_type",
                "hybrid factor must be below ice",
            ));
        }
        Ok(m)
    }

    /// The shipped coefficient table.
    pub fn shipped() -> &'static EmissionModel {
        static MODEL: OnceLock<EmissionModel> = OnceLock::new();
        MODEL.get_or_init(|| EmissionModel::parse(COEFFICIENT_TABLE).expect("shipped emission table"))
    }

    pub fn vehicle_factor(&self, c: &Context) -> f64 {
        let t = match c.vehicle_type {
            VehicleType::Sedan => self.vehicle_type.sedan,
            VehicleType::Suv => self.vehicle_type.suv,
            VehicleType::Truck => self.vehicle_type.truck,
        };
        let e = match c.engine_type {
            EngineType::Ice => self.engine_type.ice,
            EngineType::Hybrid => self.engine_type.hybrid,
        };
        t * e * (1.0 + self.age_gain * c.vehicle_age)
    }

    fn scale(&self, c: &Context) -> f64 {
        self.vehicle_factor(c) * (self.grade_gain * c.road_grade).exp()
    }

    /// Minimum rate for this context (zero tractive power, no acceleration).
    pub fn idle_floor(&self, c: &Context) -> f64 {
        self.scale(c) * self.idle
    }

    /// Tractive power per unit mass, W/kg.
    pub fn specific_power(&self, v: f64, a: f64, grade: f64) -> f64 {
        v * (a + self.gravity * grade + self.rolling) + self.aero * v * v * v
    }

    /// Emission rate in g/s at speed `v` (m/s) and acceleration `a` (m/s²).
    pub fn rate(&self, v: f64, a: f64, c: &Context) -> f64 {
        let p = self.specific_power(v, a, c.road_grade).max(0.0);
        self.scale(c) * (self.idle + self.power_gain * p + self.accel_gain * a.max(0.0))
    }
}

/// Emission rate under the shipped coefficient table.
pub fn emission_rate(v: f64, a: f64, c: &Context) -> f64 {
    EmissionModel::shipped().rate(v, a, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sedan() -> Context {
        Context {
            road_grade: 0.0,
            vehicle_type: VehicleType::Sedan,
            engine_type: EngineType::Ice,
            vehicle_age: 0.0,
            ..Context::default()
        }
    }

    #[test]
    fn standstill_is_exactly_idle() {
        assert_eq!(emission_rate(0.0, 0.0, &sedan()), 0.05);
        assert_eq!(EmissionModel::shipped().idle, 0.05);
    }

    #[test]
    fn hard_braking_clamps_to_idle_floor() {
        // P = 10 * (-2 + 0.1) + 0.0004 * 1000 = -18.6 < 0
        let c = sedan();
        assert_eq!(emission_rate(10.0, -2.0, &c), 0.05);
        let suv = Context {
            vehicle_type: VehicleType::Suv,
            ..c
        };
        assert_eq!(emission_rate(10.0, -2.0, &suv), EmissionModel::shipped().idle_floor(&suv));
    }

    #[test]
    fn cruise_value_from_table() {
        // P = 10 * 0.1 + 0.0004 * 1000 = 1.4; rate = 0.05 + 0.05 * 1.4
        let r = emission_rate(10.0, 0.0, &sedan());
        assert!((r - 0.12).abs() < 1e-15, "{r}");
    }

    #[test]
    fn hybrid_below_ice() {
        let ice = sedan();
        let hybrid = Context {
            engine_type: EngineType::Hybrid,
            ..ice
        };
        for &(v, a) in &[(0.0, 0.0), (5.0, 1.0), (15.0, -3.0), (30.0, 3.0)] {
            assert!(emission_rate(v, a, &hybrid) < emission_rate(v, a, &ice));
        }
    }
}
