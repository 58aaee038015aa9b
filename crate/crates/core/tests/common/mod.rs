#![allow(dead_code)]

use std::path::Path;

use ecolane::learner::TrainConfig;
use ecolane::policy::{PolicyConfig, PoolConfig};
use ecolane::scenario::{
    Context, ContextBounds, ContextComponent, ContextDistribution, EngineType, ScenarioFile, ScenarioSpec, VehicleType,
};

pub fn context(lane: f64, green: f64, red: f64, rate: f64, penetration: f64) -> Context {
    Context {
        green_duration: green,
        red_duration: red,
        signal_offset: 0.0,
        speed_limit: 15.0,
        lane_length: lane,
        road_grade: 0.0,
        vehicle_type: VehicleType::Sedan,
        engine_type: EngineType::Ice,
        vehicle_age: 0.0,
        arrival_rate: rate,
        av_penetration: penetration,
    }
}

/// Lane {200, 400} x (green, red) {(30,30), (20,40)} x rate {0.1, 0.25}, all AVs.
pub fn eight_scenarios(horizon: f64) -> Vec<ScenarioSpec> {
    let mut out = Vec::new();
    for lane in [200.0, 400.0] {
        for (g, r) in [(30.0, 30.0), (20.0, 40.0)] {
            for rate in [0.1, 0.25] {
                let seed = 1000 + out.len() as u64;
                out.push(ScenarioSpec::new(context(lane, g, r, rate, 1.0), seed, horizon, 0.1));
            }
        }
    }
    out
}

pub fn four_scenarios(horizon: f64) -> Vec<ScenarioSpec> {
    [(200.0, 30.0, 30.0, 0.1), (300.0, 20.0, 40.0, 0.2), (250.0, 40.0, 20.0, 0.15), (400.0, 30.0, 30.0, 0.25)]
        .iter()
        .enumerate()
        .map(|(i, &(lane, g, r, rate))| ScenarioSpec::new(context(lane, g, r, rate, 1.0), 50 + i as u64, horizon, 0.1))
        .collect()
}

pub fn mixture(scenarios: &[ScenarioSpec]) -> ContextDistribution {
    ContextDistribution {
        horizon: scenarios[0].horizon,
        dt: scenarios[0].dt,
        bounds: ContextBounds::default(),
        components: scenarios.iter().map(|s| ContextComponent::point(&s.context)).collect(),
    }
}

pub fn write_scenarios(path: &Path, scenarios: Vec<ScenarioSpec>) {
    ScenarioFile::new(scenarios).save(path).unwrap();
}

/// Small network and batch sizes that train in minutes on one core.
pub fn desk_policy(pool: PoolConfig) -> PolicyConfig {
    PolicyConfig {
        pool,
        hidden: vec![64, 64],
        decision_interval: 10,
        ..PolicyConfig::default()
    }
}

pub fn desk_train() -> TrainConfig {
    TrainConfig {
        steps_per_iteration: 2048,
        minibatch_size: 256,
        ..TrainConfig::default()
    }
}

/// Random context inside the default bounds with AV share `penetration`.
pub fn random_context<R: rand::Rng>(rng: &mut R, penetration: f64) -> Context {
    let green = rng.gen_range(10.0..60.0);
    let red = rng.gen_range(10.0..60.0);
    Context {
        green_duration: green,
        red_duration: red,
        signal_offset: rng.gen_range(0.0..green + red),
        speed_limit: rng.gen_range(8.0..25.0),
        lane_length: rng.gen_range(100.0..600.0),
        road_grade: rng.gen_range(-0.08..0.08),
        vehicle_type: [VehicleType::Sedan, VehicleType::Suv, VehicleType::Truck][rng.gen_range(0..3)],
        engine_type: [EngineType::Ice, EngineType::Hybrid][rng.gen_range(0..2)],
        vehicle_age: rng.gen_range(0.0..20.0),
        arrival_rate: rng.gen_range(0.05..0.5),
        av_penetration: penetration,
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq)]
pub struct Violations {
    pub negative_gaps: usize,
    pub red_crossings: usize,
    pub steps: usize,
}

/// Runs `world` to its horizon, asking `command` for AV accelerations each
/// step, and counts safety violations after every step.
pub fn drive<F>(world: &mut ecolane::sim::World, mut command: F) -> Violations
where
    F: FnMut(&ecolane::sim::World) -> std::collections::BTreeMap<u64, f64>,
{
    use ecolane::sim::{SignalPhase, VEHICLE_LENGTH};
    let lane = world.context.lane_length;
    let mut out = Violations::default();
    while !world.is_done() {
        world.spawn_arrivals();
        let red = world.signal.phase == SignalPhase::Red;
        let before: std::collections::BTreeMap<u64, f64> =
            world.vehicles.iter().map(|v| (v.id, v.position)).collect();
        let cmds = command(world);
        let report = world.step(&cmds).unwrap();
        out.steps += 1;
        if red {
            out.red_crossings += report
                .exited
                .iter()
                .filter(|v| before.get(&v.id).is_some_and(|&p| p <= lane))
                .count();
        }
        for pair in world.vehicles.windows(2) {
            if pair[0].position - VEHICLE_LENGTH - pair[1].position < 0.0 {
                out.negative_gaps += 1;
            }
        }
    }
    out
}
