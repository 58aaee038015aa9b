//! Benchmark harness: AV strategies against the all-IDM baseline on paired
//! seeds, benefit tables and plot-ready exports.

mod compare;
mod export;
mod run;

pub use compare::{compare, emission_benefit, throughput_benefit, BenefitRow, BenefitSummary, BenefitTable, BENEFIT_HEADER};
pub use export::{export_timespace, export_usage, signal_intervals, TIMESPACE_HEADER, USAGE_HEADER};
pub use run::{
    arrivals_digest, expand_seeds, run_episode, run_method, Controller, EpisodeOutcome, EvalOptions, EvalReport,
    Method, RunSummary, ScenarioResult, REPORT_SCHEMA_VERSION,
};

use crate::scenario::{Context, EngineType, ScenarioSpec, ScriptedArrival, VehicleClass, VehicleType};

/// One AV meeting a red light: it enters at the speed limit 300 m from
/// the line with 5 s of green left, so holding speed it arrives at about
/// t = 20 s, mid-red (red runs 5 s to 35 s).
pub fn red_arrival_scenario() -> ScenarioSpec {
    let context = Context {
        green_duration: 30.0,
        red_duration: 30.0,
        signal_offset: 25.0,
        speed_limit: 15.0,
        lane_length: 300.0,
        road_grade: 0.0,
        vehicle_type: VehicleType::Sedan,
        engine_type: EngineType::Ice,
        vehicle_age: 0.0,
        arrival_rate: 0.0,
        av_penetration: 1.0,
    };
    let mut spec = ScenarioSpec::new(context, 7, 90.0, 0.1);
    spec.arrivals = vec![ScriptedArrival {
        time: 0.0,
        class: VehicleClass::Av,
    }];
    spec
}
