use serde::{Deserialize, Serialize};

use super::world::{VehicleState, World};
use super::STOP_THRESHOLD;
use crate::error::{Error, Result};

/// Weights of the per-step reward `v - w1 e - w2 s - w3 |a|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub emission: f64,
    pub stop: f64,
    pub accel: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            emission: 30.0,
            stop: 15.0,
            accel: 10.0,
        }
    }
}

/// Per-step reward from raw quantities: speed (m/s), emission rate (g/s),
/// applied acceleration (m/s²).
pub fn reward_terms(speed: f64, emission_rate: f64, accel: f64, w: &RewardWeights) -> f64 {
    let stopped = if speed < STOP_THRESHOLD { 1.0 } else { 0.0 };
    speed - w.emission * emission_rate - w.stop * stopped - w.accel * accel.abs()
}

pub fn vehicle_reward(v: &VehicleState, w: &RewardWeights) -> f64 {
    reward_terms(v.speed, v.emission_rate, v.accel, w)
}

impl World {
    /// Reward of vehicle `id` for the step just simulated. Vehicles that
    /// crossed the stop line in that step are still addressable.
    pub fn step_reward(&self, id: u64, w: &RewardWeights) -> Result<f64> {
        if let Some(v) = self.vehicle(id) {
            return Ok(vehicle_reward(v, w));
        }
        match self.exited.iter().rev().find(|v| v.id == id) {
            Some(v) if v.exit_time.is_some_and(|t| (t - self.clock).abs() < 1e-9) => {
                Ok(vehicle_reward(v, w))
            }
            _ => Err(Error::UnknownVehicle(id)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moving_case() {
        let r = reward_terms(10.0, 0.2, 0.5, &RewardWeights::default());
        assert!((r - -1.0).abs() < 1e-12, "{r}");
    }

    #[test]
    fn stopped_case() {
        let r = reward_terms(0.0, 0.05, 0.0, &RewardWeights::default());
        assert_eq!(r, -30.0 * 0.05 - 15.0);
    }

    #[test]
    fn zero_weights_give_speed() {
        let w = RewardWeights {
            emission: 0.0,
            stop: 0.0,
            accel: 0.0,
        };
        assert_eq!(reward_terms(7.25, 3.0, -2.0, &w), 7.25);
    }

    #[test]
    fn deceleration_is_penalized_by_magnitude() {
        let w = RewardWeights::default();
        assert_eq!(reward_terms(10.0, 0.0, -1.0, &w), reward_terms(10.0, 0.0, 1.0, &w));
    }
}
