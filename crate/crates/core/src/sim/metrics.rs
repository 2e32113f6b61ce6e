use serde::{Deserialize, Serialize};

use super::demand::PedestrianClass;
use super::plant::PlantConfig;
use super::state::TrafficState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    /// Average delay, s/veh, over every vehicle that arrived.
    pub ad_s: f64,
    /// Average queue length, m/lane.
    pub aql_m: f64,
    /// Crossing completion rate of elderly pedestrians, %. `None` when no
    /// elderly pedestrian showed up.
    pub ccr_pct: Option<f64>,
    /// Mean ambulance delay, s. `None` without ambulances.
    pub ambulance_ad_s: Option<f64>,
}

pub fn compute_metrics(state: &TrafficState, horizon_s: f64, plant: &PlantConfig) -> SimMetrics {
    let lanes = state.queue.len().max(1) as f64;
    let ad_s = state.cum_delay / state.arrived_total.max(1.0);
    let aql_m = if horizon_s > 0.0 {
        state.cum_delay / horizon_s * plant.vehicle_length_m / lanes
    } else {
        0.0
    };

    let elderly: Vec<_> = state.pedestrians.iter().filter(|p| p.class == PedestrianClass::Elderly).collect();
    let ccr_pct = if elderly.is_empty() {
        None
    } else {
        let done = elderly.iter().filter(|p| p.completed).count();
        Some(done as f64 / elderly.len() as f64 * 100.0)
    };

    let arrived: Vec<_> = state.ambulances.iter().filter(|a| a.queue_ahead.is_some()).collect();
    let ambulance_ad_s = if arrived.is_empty() {
        None
    } else {
        Some(arrived.iter().map(|a| a.delay).sum::<f64>() / arrived.len() as f64)
    };

    SimMetrics { ad_s, aql_m, ccr_pct, ambulance_ad_s }
}
