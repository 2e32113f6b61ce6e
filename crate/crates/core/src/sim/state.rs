use serde::{Deserialize, Serialize};

use super::demand::{AmbulanceArrival, PedestrianClass};
use super::layout::{LaneId, WalkDirection};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbulanceRecord {
    pub lane: LaneId,
    pub arrival_time: f64,
    /// Vehicles queued ahead, fixed when the ambulance arrives.
    pub queue_ahead: Option<f64>,
    pub delay: f64,
    pub departure_time: Option<f64>,
}

impl AmbulanceRecord {
    pub fn scheduled(arrival: &AmbulanceArrival) -> Self {
        AmbulanceRecord {
            lane: arrival.lane,
            arrival_time: arrival.time_s,
            queue_ahead: None,
            delay: 0.0,
            departure_time: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedestrianRecord {
    pub arrival_time: f64,
    pub speed_mps: f64,
    pub direction: WalkDirection,
    pub class: PedestrianClass,
    /// Onset time of the green the pedestrian is currently crossing in.
    pub crossing_since: Option<f64>,
    pub attempts: u32,
    /// Crossed within a single green on the first attempt.
    pub completed: bool,
    /// Reached the far curb, possibly after being caught by a phase change.
    pub finished: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficState {
    /// Fluid queue per incoming lane, vehicles.
    pub queue: Vec<f64>,
    /// Vehicle-seconds of queueing, i.e. the time integral of total queue.
    pub cum_delay: f64,
    pub arrived_total: f64,
    pub departed_total: f64,
    pub departed_per_lane: Vec<f64>,
    pub sim_time: f64,
    pub ambulances: Vec<AmbulanceRecord>,
    pub pedestrians: Vec<PedestrianRecord>,
}

impl TrafficState {
    pub fn empty(lanes: usize) -> Self {
        TrafficState {
            queue: vec![0.0; lanes],
            cum_delay: 0.0,
            arrived_total: 0.0,
            departed_total: 0.0,
            departed_per_lane: vec![0.0; lanes],
            sim_time: 0.0,
            ambulances: vec![],
            pedestrians: vec![],
        }
    }

    pub fn total_queue(&self) -> f64 {
        self.queue.iter().sum()
    }

    /// `arrived - departed - Σ queue`; zero when vehicles are conserved.
    pub fn conservation_residual(&self) -> f64 {
        self.arrived_total - self.departed_total - self.total_queue()
    }
}
