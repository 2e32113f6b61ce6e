//! Discrete-time point-queue model of one isolated signalised intersection.

mod ambulance;
mod demand;
mod incident;
mod layout;
mod metrics;
mod pedestrian;
mod plant;
mod signal;
mod state;

use thiserror::Error;

pub use ambulance::advance_ambulance;
pub use demand::{
    elderly_crossing_pedestrians, generate_arrivals, generate_pedestrian_arrivals, AmbulanceArrival,
    ApproachVolume, DemandProfile, PedestrianClass, PedestrianFlow, MODERATE_SCALE, OVERSATURATED_VOLUMES,
};
pub use incident::{capacity_multipliers, EffectKind, IncidentEffect, LaneMultiplier};
pub use layout::{
    Approach, ApproachSpec, IntersectionLayout, LaneId, LaneInfo, Movement, Phase, PhaseId, WalkDirection,
};
pub use metrics::{compute_metrics, SimMetrics};
pub use pedestrian::{advance_pedestrians, crossing_time, finalize_pedestrians};
pub use plant::{step, PlantConfig, StepReport};
pub use signal::{SignalEvent, SignalState, SignalTiming};
pub use state::{AmbulanceRecord, PedestrianRecord, TrafficState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid layout: {0}")]
    Layout(String),
    #[error("invalid demand: {0}")]
    Demand(String),
    #[error("invalid incident: {0}")]
    Incident(String),
    #[error("invalid signal timing: {0}")]
    Signal(String),
}
