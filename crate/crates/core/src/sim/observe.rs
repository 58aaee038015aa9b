use serde::{Deserialize, Serialize};

use super::world::{SignalPhase, World};
use crate::error::{Error, Result};
use crate::scenario::{Context, ContextVector, CONTEXT_DIM};

/// One neighbour slot. Absent slots carry `present = false`,
/// `gap = lane_length`, `speed = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborSlot {
    pub present: bool,
    pub gap: f64,
    pub speed: f64,
}

impl NeighborSlot {
    pub fn absent(lane_length: f64) -> Self {
        NeighborSlot {
            present: false,
            gap: lane_length,
            speed: 0.0,
        }
    }
}

/// Per-vehicle sensor view plus the encoded scenario context.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub ego_speed: f64,
    pub ego_distance_to_signal: f64,
    pub leader: NeighborSlot,
    pub follower: NeighborSlot,
    /// Adjacent-lane leader/follower slots (left leader, left follower,
    /// right leader, right follower). Always absent on a single-lane corridor.
    pub adjacent: [NeighborSlot; 4],
    pub signal_phase: SignalPhase,
    pub time_to_change: f64,
    pub context: Context,
    pub context_vector: ContextVector,
}

const SPEED_SCALE: f64 = 20.0;
const DISTANCE_SCALE: f64 = 200.0;
const TIME_SCALE: f64 = 60.0;

/// Length of [`Observation::features`].
pub const OBS_DIM: usize = 2 + 3 * 6 + 2 + CONTEXT_DIM;

impl Observation {
    /// Network input: scaled observation fields followed by the context
    /// vector. Signal phase is 1 for green, 0 for red.
    pub fn features(&self) -> [f64; OBS_DIM] {
        let mut f = [0.0; OBS_DIM];
        f[0] = self.ego_speed / SPEED_SCALE;
        f[1] = self.ego_distance_to_signal / DISTANCE_SCALE;
        let slots = std::iter::once(&self.leader)
            .chain(std::iter::once(&self.follower))
            .chain(self.adjacent.iter());
        for (k, s) in slots.enumerate() {
            f[2 + 3 * k] = if s.present { 1.0 } else { 0.0 };
            f[3 + 3 * k] = s.gap / DISTANCE_SCALE;
            f[4 + 3 * k] = s.speed / SPEED_SCALE;
        }
        f[20] = match self.signal_phase {
            SignalPhase::Green => 1.0,
            SignalPhase::Red => 0.0,
        };
        f[21] = self.time_to_change / TIME_SCALE;
        f[22..].copy_from_slice(&self.context_vector);
        f
    }
}

impl World {
    pub fn observe(&self, id: u64) -> Result<Observation> {
        let idx = self.index_of(id).ok_or(Error::UnknownVehicle(id))?;
        Ok(self.observe_index(idx))
    }

    pub(crate) fn observe_index(&self, idx: usize) -> Observation {
        let lane = self.context.lane_length;
        let ego = &self.vehicles[idx];
        let leader = if idx > 0 {
            let l = &self.vehicles[idx - 1];
            NeighborSlot {
                present: true,
                gap: l.position - super::VEHICLE_LENGTH - ego.position,
                speed: l.speed,
            }
        } else {
            NeighborSlot::absent(lane)
        };
        let follower = match self.vehicles.get(idx + 1) {
            Some(f) => NeighborSlot {
                present: true,
                gap: ego.position - super::VEHICLE_LENGTH - f.position,
                speed: f.speed,
            },
            None => NeighborSlot::absent(lane),
        };
        Observation {
            ego_speed: ego.speed,
            ego_distance_to_signal: (lane - ego.position).max(0.0),
            leader,
            follower,
            adjacent: [NeighborSlot::absent(lane); 4],
            signal_phase: self.signal.phase,
            time_to_change: self.signal.time_to_change,
            context: self.context,
            context_vector: self.context_vector,
        }
    }
}
