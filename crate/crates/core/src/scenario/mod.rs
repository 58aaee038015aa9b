//! Scenario contexts: definition, file ingestion, sampling and encoding.

mod context;
mod distribution;
mod encode;
mod file;

pub use context::{
    Context, EngineType, ScenarioSpec, ScriptedArrival, VehicleClass, VehicleType, MAX_ROAD_GRADE,
};
pub use distribution::{sample_context, CategoryDist, ContextComponent, ContextDistribution, FieldDist};
pub use encode::{
    encode_context, ContextBounds, ContextVector, Range, CONTEXT_DIM, NUMERIC_CONTEXT_FIELDS,
};
pub use file::{load_scenarios, ScenarioFile, SCENARIO_SCHEMA_VERSION};
