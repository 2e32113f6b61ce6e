use serde::{Deserialize, Serialize};

use super::incident::{capacity_multipliers, IncidentEffect};
use super::state::TrafficState;

/// Physical constants of the plant. The controller never reads these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantConfig {
    /// Saturation flow of every lane, veh/h.
    pub saturation_flow_vph: f64,
    /// Effective vehicle length used to express queues in metres.
    pub vehicle_length_m: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig { saturation_flow_vph: 1800.0, vehicle_length_m: 7.5 }
    }
}

/// What happened on each lane during one plant step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub time: f64,
    pub queue_before: Vec<f64>,
    pub arrivals: Vec<f64>,
    pub departures: Vec<f64>,
    pub green: Vec<bool>,
}

/// Advances the store-and-forward plant by `dt` seconds.
///
/// Lane `k` discharges `min(queue_k + arrivals_k, s · m_k · green_k · dt)`
/// where `s` is the plant saturation flow and `m_k` the product of the
/// capacity multipliers of incidents active at the start of the step.
pub fn step(
    state: &mut TrafficState,
    green: &[bool],
    plant: &PlantConfig,
    effects: &[IncidentEffect],
    arrivals: &[f64],
    dt: f64,
) -> StepReport {
    let lanes = state.queue.len();
    debug_assert_eq!(green.len(), lanes);
    debug_assert_eq!(arrivals.len(), lanes);
    let multipliers = capacity_multipliers(effects, lanes, state.sim_time);
    let sat_per_s = plant.saturation_flow_vph / 3600.0;
    let queue_before = state.queue.clone();
    let mut departures = vec![0.0; lanes];

    state.cum_delay += queue_before.iter().sum::<f64>() * dt;
    for k in 0..lanes {
        let available = state.queue[k] + arrivals[k];
        let capacity = if green[k] { sat_per_s * multipliers[k] * dt } else { 0.0 };
        let out = available.min(capacity);
        departures[k] = out;
        state.queue[k] = available - out;
        state.arrived_total += arrivals[k];
        state.departed_total += out;
        state.departed_per_lane[k] += out;
    }
    let report = StepReport {
        time: state.sim_time,
        queue_before,
        arrivals: arrivals.to_vec(),
        departures,
        green: green.to_vec(),
    };
    state.sim_time += dt;
    report
}
