use serde::{Deserialize, Serialize};

use super::world::World;
use crate::scenario::VehicleClass;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub id: u64,
    pub class: VehicleClass,
    pub entry_time: f64,
    pub exit_time: Option<f64>,
    /// Exit minus entry, or horizon minus entry when censored.
    pub travel_time: f64,
    pub censored: bool,
    pub emissions: f64,
    pub stops: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    /// g, over every vehicle that arrived (queued, in corridor or exited).
    pub total_emissions: f64,
    pub mean_travel_time: f64,
    /// Exits per hour.
    pub throughput: f64,
    pub stop_count: u64,
    pub exited: usize,
    pub vehicles: Vec<VehicleRecord>,
}

impl World {
    /// Episode totals. Vehicles still queued or in the corridor count with
    /// their travel time censored at the current clock.
    pub fn collect_metrics(&self) -> EpisodeMetrics {
        let end = self.clock;
        let mut records: Vec<VehicleRecord> = self
            .exited
            .iter()
            .chain(self.vehicles.iter())
            .chain(self.pending.iter())
            .map(|v| VehicleRecord {
                id: v.id,
                class: v.class,
                entry_time: v.entry_time,
                exit_time: v.exit_time,
                travel_time: v.travel_time(end),
                censored: v.exit_time.is_none(),
                emissions: v.cumulative_emissions,
                stops: v.stop_count,
            })
            .collect();
        records.sort_by_key(|r| r.id);
        let total_emissions = records.iter().map(|r| r.emissions).sum();
        let mean_travel_time = if records.is_empty() {
            0.0
        } else {
            records.iter().map(|r| r.travel_time).sum::<f64>() / records.len() as f64
        };
        let exited = self.exited.len();
        let throughput = if self.horizon > 0.0 {
            exited as f64 * 3600.0 / self.horizon
        } else {
            0.0
        };
        EpisodeMetrics {
            total_emissions,
            mean_travel_time,
            throughput,
            stop_count: records.iter().map(|r| r.stops as u64).sum(),
            exited,
            vehicles: records,
        }
    }
}
