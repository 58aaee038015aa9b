use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::emission::EmissionModel;
use super::*;
use crate::error::{Error, Result};
use crate::nominal::{idm_law, IdmParams};
use crate::scenario::{
    encode_context, Context, ContextBounds, ContextVector, ScenarioSpec, ScriptedArrival,
    VehicleClass,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalPhase {
    Green,
    Red,
}

impl SignalPhase {
    pub fn as_str(self) -> &'static str {
        match self {
            SignalPhase::Green => "green",
            SignalPhase::Red => "red",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalState {
    pub phase: SignalPhase,
    pub time_to_change: f64,
}

impl SignalState {
    /// Fixed-time signal state at absolute time `t`.
    pub fn at(c: &Context, t: f64) -> Self {
        let cycle = c.cycle();
        let eps = 1e-9 * cycle.max(1.0);
        let mut pos = (t + c.signal_offset).rem_euclid(cycle);
        if cycle - pos < eps {
            pos = 0.0;
        }
        if (pos - c.green_duration).abs() < eps {
            pos = c.green_duration;
        }
        if pos < c.green_duration {
            SignalState {
                phase: SignalPhase::Green,
                time_to_change: c.green_duration - pos,
            }
        } else {
            SignalState {
                phase: SignalPhase::Red,
                time_to_change: cycle - pos,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: u64,
    pub class: VehicleClass,
    /// Front bumper, metres from the corridor entry; the stop line is at
    /// `lane_length`.
    pub position: f64,
    pub speed: f64,
    /// Acceleration actually applied over the last step.
    pub accel: f64,
    /// Emission rate over the last step, g/s.
    pub emission_rate: f64,
    pub cumulative_emissions: f64,
    /// Part of `cumulative_emissions` spent idling in the entry queue.
    pub queue_emissions: f64,
    /// Demand time: when the vehicle arrived at the corridor entry.
    pub entry_time: f64,
    /// When the vehicle was physically inserted at position 0.
    pub insert_time: Option<f64>,
    pub exit_time: Option<f64>,
    pub stop_count: u32,
    pub stopped: bool,
    /// Car-following law used when the vehicle is not commanded.
    pub driver: IdmParams,
}

impl VehicleState {
    pub fn travel_time(&self, horizon: f64) -> f64 {
        self.exit_time.unwrap_or(horizon) - self.entry_time
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrivalRecord {
    pub id: u64,
    pub time: f64,
    pub class: VehicleClass,
}

/// Dynamic state of one corridor.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub clock: f64,
    pub step_index: u64,
    pub dt: f64,
    pub horizon: f64,
    pub context: Context,
    pub context_vector: ContextVector,
    pub signal: SignalState,
    /// Vehicles in the corridor, front (closest to the stop line) first.
    pub vehicles: Vec<VehicleState>,
    /// Arrived vehicles waiting for a gap at the entry.
    pub pending: VecDeque<VehicleState>,
    pub exited: Vec<VehicleState>,
    pub arrivals: Vec<ArrivalRecord>,
    scripted: Vec<ScriptedArrival>,
    next_scripted: usize,
    next_id: u64,
    rng: ChaCha8Rng,
    emission: EmissionModel,
}

/// Result of one [`World::step`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    /// Final states of vehicles that crossed the stop line this step.
    pub exited: Vec<VehicleState>,
    /// Phase that governed the step.
    pub phase: Option<SignalPhase>,
}

pub fn init_world(spec: &ScenarioSpec, bounds: &ContextBounds) -> Result<World> {
    spec.validate()?;
    let context_vector = encode_context(&spec.context, bounds)?;
    let mut scripted = spec.arrivals.clone();
    scripted.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(World {
        clock: 0.0,
        step_index: 0,
        dt: spec.dt,
        horizon: spec.horizon,
        context: spec.context,
        context_vector,
        signal: SignalState::at(&spec.context, 0.0),
        vehicles: Vec::new(),
        pending: VecDeque::new(),
        exited: Vec::new(),
        arrivals: Vec::new(),
        scripted,
        next_scripted: 0,
        next_id: 0,
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        emission: *EmissionModel::shipped(),
    })
}

/// Speed at which a follower `gap` metres behind a leader moving at
/// `leader_speed` can still stop behind it braking at `COMFORT_BRAKING`.
fn safe_follow_speed(gap: f64, leader_speed: f64) -> f64 {
    (leader_speed * leader_speed + 2.0 * COMFORT_BRAKING * (gap - SAFETY_JAM_GAP).max(0.0)).sqrt()
}

/// Largest acceleration keeping `gap' >= s0 + v' * T_safe` after one step,
/// assuming the leader holds its speed.
pub fn safety_floor_accel(speed: f64, gap: f64, leader_speed: f64, dt: f64) -> f64 {
    let v_max = (gap + leader_speed * dt - SAFETY_JAM_GAP) / (dt + SAFETY_TIME_GAP);
    (v_max - speed) / dt
}

impl World {
    pub fn is_done(&self) -> bool {
        self.step_index as usize >= (self.horizon / self.dt).round() as usize
    }

    pub fn emission_model(&self) -> &EmissionModel {
        &self.emission
    }

    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.vehicles.iter().position(|v| v.id == id)
    }

    pub fn vehicle(&self, id: u64) -> Option<&VehicleState> {
        self.vehicles.iter().find(|v| v.id == id)
    }

    pub fn av_ids(&self) -> Vec<u64> {
        self.vehicles
            .iter()
            .filter(|v| v.class == VehicleClass::Av)
            .map(|v| v.id)
            .collect()
    }

    fn new_vehicle(&mut self, class: VehicleClass, time: f64) -> VehicleState {
        // Four noise draws per vehicle regardless of class keep the RNG
        // stream independent of which vehicles are controlled.
        let mut noise = || self.rng.gen_range(1.0 - HUMAN_NOISE..=1.0 + HUMAN_NOISE);
        let base = IdmParams::human(self.context.speed_limit);
        let driver = IdmParams {
            desired_speed: base.desired_speed * noise(),
            time_headway: base.time_headway * noise(),
            max_accel: base.max_accel * noise(),
            comfortable_decel: base.comfortable_decel * noise(),
            ..base
        };
        let id = self.next_id;
        self.next_id += 1;
        self.arrivals.push(ArrivalRecord { id, time, class });
        VehicleState {
            id,
            class,
            position: 0.0,
            speed: 0.0,
            accel: 0.0,
            emission_rate: 0.0,
            cumulative_emissions: 0.0,
            queue_emissions: 0.0,
            entry_time: time,
            insert_time: None,
            exit_time: None,
            stop_count: 0,
            stopped: false,
            driver,
        }
    }

    /// Demand process plus entry-queue insertion for the current step.
    ///
    /// Random demand arrives with probability `1 - exp(-rate * dt)` per
    /// step; the class is AV with probability `av_penetration`. Scripted
    /// arrivals replace random demand when present. At most one queued
    /// vehicle enters per step, and only when the gap to the last vehicle
    /// is at least `MIN_SPAWN_GAP`.
    pub fn spawn_arrivals(&mut self) {
        let now = self.clock;
        if self.scripted.is_empty() {
            let p = 1.0 - (-self.context.arrival_rate * self.dt).exp();
            let u: f64 = self.rng.gen();
            let class_draw: f64 = self.rng.gen();
            if u < p {
                let class = if class_draw < self.context.av_penetration {
                    VehicleClass::Av
                } else {
                    VehicleClass::Human
                };
                let v = self.new_vehicle(class, now);
                self.pending.push_back(v);
            }
        } else {
            while self.next_scripted < self.scripted.len()
                && self.scripted[self.next_scripted].time <= now + 1e-9
            {
                let a = self.scripted[self.next_scripted];
                self.next_scripted += 1;
                let v = self.new_vehicle(a.class, now);
                self.pending.push_back(v);
            }
        }
        self.try_insert();
    }

    fn try_insert(&mut self) {
        if self.pending.is_empty() {
            return;
        }
        let limit = self.context.speed_limit;
        let lane = self.context.lane_length;
        let entry_speed = match self.vehicles.last() {
            Some(last) => {
                let gap = last.position - VEHICLE_LENGTH;
                if gap < MIN_SPAWN_GAP {
                    return;
                }
                limit.min(safe_follow_speed(gap, last.speed))
            }
            None => limit.min(safe_follow_speed(lane, 0.0)),
        };
        let mut v = self.pending.pop_front().expect("non-empty");
        v.speed = entry_speed;
        v.position = 0.0;
        v.insert_time = Some(self.clock);
        v.stopped = entry_speed < STOP_THRESHOLD;
        self.vehicles.push(v);
    }

    /// Inserts a vehicle directly at `position`, bypassing the demand
    /// process. Fails if it would break ordering or gap invariants.
    pub fn insert_vehicle(&mut self, class: VehicleClass, position: f64, speed: f64) -> Result<u64> {
        if !(0.0..=self.context.lane_length).contains(&position) {
            return Err(Error::invalid("position", "outside the corridor"));
        }
        if !(0.0..=self.context.speed_limit).contains(&speed) {
            return Err(Error::invalid("speed", "outside [0, speed_limit]"));
        }
        let idx = self.vehicles.partition_point(|v| v.position > position);
        if idx > 0 && self.vehicles[idx - 1].position - VEHICLE_LENGTH - position <= 0.0 {
            return Err(Error::invalid("position", "overlaps the vehicle ahead"));
        }
        if let Some(f) = self.vehicles.get(idx) {
            if position - VEHICLE_LENGTH - f.position <= 0.0 {
                return Err(Error::invalid("position", "overlaps the vehicle behind"));
            }
        }
        let mut v = self.new_vehicle(class, self.clock);
        v.position = position;
        v.speed = speed;
        v.insert_time = Some(self.clock);
        v.stopped = speed < STOP_THRESHOLD;
        let id = v.id;
        self.vehicles.insert(idx, v);
        Ok(id)
    }

    /// Braking demanded by the red-light rule, if any. Applies when the
    /// vehicle, holding its speed, would reach the line while the signal is
    /// red and its comfortable stopping envelope already reaches the line.
    fn red_light_accel(&self, v: &VehicleState) -> Option<f64> {
        let d = self.context.lane_length - v.position;
        if v.speed <= 1e-6 {
            return None;
        }
        let arrival = self.clock + d / v.speed;
        if SignalState::at(&self.context, arrival).phase == SignalPhase::Green {
            return None;
        }
        let envelope = v.speed * v.speed / (2.0 * COMFORT_BRAKING);
        if envelope + v.speed * self.dt < d {
            return None;
        }
        let a = -v.speed * v.speed / (2.0 * d.max(1e-3));
        Some(a.max(A_EMERGENCY))
    }

    /// Advances the world by one step.
    ///
    /// `av_commands` maps live AV ids to commanded accelerations. AVs
    /// without a command and all humans follow their IDM law. The signal
    /// state at the start of the step governs the whole step.
    pub fn step(&mut self, av_commands: &BTreeMap<u64, f64>) -> Result<StepReport> {
        for &id in av_commands.keys() {
            match self.vehicle(id) {
                None => return Err(Error::UnknownVehicle(id)),
                Some(v) if v.class != VehicleClass::Av => return Err(Error::NotAnAv(id)),
                Some(_) => {}
            }
        }
        let dt = self.dt;
        let lane = self.context.lane_length;
        let limit = self.context.speed_limit;
        let red = self.signal.phase == SignalPhase::Red;
        let n = self.vehicles.len();

        let mut desired = Vec::with_capacity(n);
        for i in 0..n {
            let veh = &self.vehicles[i];
            let leader = (i > 0).then(|| {
                let l = &self.vehicles[i - 1];
                (l.position - VEHICLE_LENGTH - veh.position, l.speed)
            });
            let mut a = match av_commands.get(&veh.id) {
                Some(&cmd) => {
                    let mut a = cmd.clamp(A_MIN, A_MAX);
                    if let Some((gap, ls)) = leader {
                        a = a.min(safety_floor_accel(veh.speed, gap, ls, dt));
                    }
                    a
                }
                None => {
                    let lead = leader.or_else(|| red.then(|| (lane - veh.position, 0.0)));
                    idm_law(veh.speed, lead, &veh.driver)
                }
            };
            if let Some(stop) = self.red_light_accel(veh) {
                a = a.min(stop);
            }
            desired.push(a.max(A_EMERGENCY));
        }

        // Kinematic update, front to back, with hard gap and stop-line caps.
        let mut report = StepReport {
            exited: Vec::new(),
            phase: Some(self.signal.phase),
        };
        let mut leader_new_pos: Option<f64> = None;
        for (veh, a) in self.vehicles.iter_mut().zip(&desired) {
            let mut v_new = (veh.speed + a * dt).clamp(0.0, limit);
            let mut cap = f64::INFINITY;
            if let Some(lp) = leader_new_pos {
                cap = (lp - VEHICLE_LENGTH - MIN_STANDSTILL_GAP - veh.position) / dt;
            }
            if red && veh.position <= lane {
                cap = cap.min((lane - veh.position) / dt);
            }
            v_new = v_new.min(cap.max(0.0));
            let applied = (v_new - veh.speed) / dt;
            veh.position += v_new * dt;
            veh.speed = v_new;
            veh.accel = applied;
            veh.emission_rate = self.emission.rate(v_new, applied, &self.context);
            veh.cumulative_emissions += veh.emission_rate * dt;
            let now_stopped = v_new < STOP_THRESHOLD;
            if now_stopped && !veh.stopped {
                veh.stop_count += 1;
            }
            veh.stopped = now_stopped;
            leader_new_pos = Some(veh.position);
        }

        let idle = self.emission.idle_floor(&self.context);
        for p in self.pending.iter_mut() {
            p.emission_rate = idle;
            p.queue_emissions += idle * dt;
            p.cumulative_emissions += idle * dt;
        }

        self.step_index += 1;
        self.clock = self.step_index as f64 * dt;
        let exit_time = self.clock;
        let mut k = 0;
        while k < self.vehicles.len() {
            if self.vehicles[k].position > lane {
                let mut v = self.vehicles.remove(k);
                v.exit_time = Some(exit_time);
                report.exited.push(v.clone());
                self.exited.push(v);
            } else {
                k += 1;
            }
        }
        self.signal = SignalState::at(&self.context, self.clock);
        Ok(report)
    }

    /// Spawn then step: one full simulation tick.
    pub fn advance(&mut self, av_commands: &BTreeMap<u64, f64>) -> Result<StepReport> {
        self.spawn_arrivals();
        self.step(av_commands)
    }
}
