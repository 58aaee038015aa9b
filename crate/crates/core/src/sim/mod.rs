//! Discrete-time single-lane signalized corridor.
//!
//! Vehicles enter at position 0 and leave once past the stop line at
//! `lane_length`. Humans follow a noisy IDM; AVs execute commanded
//! accelerations clipped to `[A_MIN, A_MAX]` and capped by a constant-time-gap
//! safety floor. Every vehicle obeys a red-light braking rule, and a final
//! kinematic projection keeps gaps positive and the stop line uncrossed
//! on red.

mod emission;
mod metrics;
mod observe;
mod reward;
mod trace;
mod world;

pub use emission::{emission_rate, EmissionModel, EngineTypeFactors, VehicleTypeFactors};
pub use metrics::{EpisodeMetrics, VehicleRecord};
pub use observe::{NeighborSlot, Observation, OBS_DIM};
pub use reward::{reward_terms, vehicle_reward, RewardWeights};
pub use trace::{SignalRow, Trace, TraceRow, TRACE_HEADER};
pub use world::{
    init_world, safety_floor_accel, ArrivalRecord, SignalPhase, SignalState, StepReport,
    VehicleState, World,
};

pub const A_MIN: f64 = -3.0;
pub const A_MAX: f64 = 3.0;
/// Physical braking limit applied after all rules.
pub const A_EMERGENCY: f64 = -9.0;
/// Maximum comfortable braking used by the red-light rule and entry speeds.
pub const COMFORT_BRAKING: f64 = 3.0;
pub const STOP_THRESHOLD: f64 = 0.3;
pub const VEHICLE_LENGTH: f64 = 5.0;
pub const MIN_SPAWN_GAP: f64 = 7.0;
/// Safety-floor jam gap s0, m.
pub const SAFETY_JAM_GAP: f64 = 2.0;
/// Safety-floor time gap, s.
pub const SAFETY_TIME_GAP: f64 = 0.6;
/// Gap the kinematic projection always preserves, m.
pub const MIN_STANDSTILL_GAP: f64 = 0.5;
/// Relative spread of per-driver IDM parameters.
pub const HUMAN_NOISE: f64 = 0.1;
