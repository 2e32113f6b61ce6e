//! Scenario configuration: demand, incident script, controller and variant.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{ControllerKind, ControllerParams, MpcSettings, DEFAULT_THETA_MAX};
use crate::sim::{
    elderly_crossing_pedestrians, AmbulanceArrival, Approach, DemandProfile, EffectKind, IncidentEffect,
    IntersectionLayout, LaneId, LaneMultiplier, SignalTiming, SimError, MODERATE_SCALE, OVERSATURATED_VOLUMES,
};
use crate::tlrs::DEFAULT_K;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("cannot parse scenario JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DemandLevel {
    #[default]
    Oversaturated,
    Moderate,
}

impl DemandLevel {
    pub fn scale(self) -> f64 {
        match self {
            DemandLevel::Oversaturated => 1.0,
            DemandLevel::Moderate => MODERATE_SCALE,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DemandLevel::Oversaturated => "oversaturated",
            DemandLevel::Moderate => "moderate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncidentKind {
    CarAccident,
    RoadMaintenance,
    AmbulancePriority,
    ElderlyCrossing,
}

impl IncidentKind {
    pub const ALL: [IncidentKind; 4] = [
        IncidentKind::CarAccident,
        IncidentKind::RoadMaintenance,
        IncidentKind::AmbulancePriority,
        IncidentKind::ElderlyCrossing,
    ];

    pub fn label(self) -> &'static str {
        match self {
            IncidentKind::CarAccident => "car_accident",
            IncidentKind::RoadMaintenance => "road_maintenance",
            IncidentKind::AmbulancePriority => "ambulance_priority",
            IncidentKind::ElderlyCrossing => "elderly_crossing",
        }
    }

    /// Incidents without expert references in the seed database.
    pub fn is_unseen(self) -> bool {
        matches!(self, IncidentKind::AmbulancePriority | IncidentKind::ElderlyCrossing)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Baseline,
    LlmNoCot,
    Llm,
    LlmTlrs,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Baseline, Variant::LlmNoCot, Variant::Llm, Variant::LlmTlrs];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::LlmNoCot => "llm_no_cot",
            Variant::Llm => "llm",
            Variant::LlmTlrs => "llm_tlrs",
        }
    }

    pub fn uses_agent(self) -> bool {
        self != Variant::Baseline
    }

    pub fn uses_instruction(self) -> bool {
        matches!(self, Variant::Llm | Variant::LlmTlrs)
    }

    pub fn uses_tlrs(self) -> bool {
        self == Variant::LlmTlrs
    }
}

/// Ambulances arriving at a fixed interval on one lane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmbulanceSchedule {
    pub lane: LaneId,
    pub first_s: f64,
    pub interval_s: f64,
    pub count: usize,
}

impl AmbulanceSchedule {
    pub fn arrivals(&self) -> Vec<AmbulanceArrival> {
        (0..self.count)
            .map(|i| AmbulanceArrival { time_s: self.first_s + i as f64 * self.interval_s, lane: self.lane })
            .collect()
    }
}

/// Incident script. `kind` selects a preset; every other field overrides it.
/// The narrative and location are what the agent sees; `capacity` is plant
/// ground truth and never reaches the agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidentScript {
    pub kind: IncidentKind,
    #[serde(default)]
    pub start_s: Option<f64>,
    /// Defaults to the horizon end.
    #[serde(default)]
    pub end_s: Option<f64>,
    #[serde(default)]
    pub type_label: Option<String>,
    #[serde(default)]
    pub narrative: Option<String>,
    #[serde(default)]
    pub approach: Option<Approach>,
    #[serde(default)]
    pub lanes: Option<Vec<LaneId>>,
    #[serde(default)]
    pub capacity: Option<Vec<LaneMultiplier>>,
    #[serde(default)]
    pub ambulances: Option<AmbulanceSchedule>,
    /// Minimum green of through phases while pedestrians are present.
    #[serde(default)]
    pub through_min_green_s: Option<f64>,
}

/// Incident script with every preset value filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedIncident {
    pub kind: IncidentKind,
    pub window: (f64, f64),
    pub type_label: String,
    pub narrative: String,
    pub approach: Approach,
    pub lanes: Vec<LaneId>,
    pub capacity: Vec<LaneMultiplier>,
    pub ambulances: Option<AmbulanceSchedule>,
    pub pedestrians: bool,
    pub through_min_green_s: Option<f64>,
}

impl ResolvedIncident {
    pub fn is_active(&self, t: f64) -> bool {
        self.window.0 <= t && t < self.window.1
    }

    pub fn effect(&self) -> IncidentEffect {
        let kind = match self.kind {
            IncidentKind::CarAccident => EffectKind::Accident,
            IncidentKind::RoadMaintenance => EffectKind::Maintenance,
            IncidentKind::AmbulancePriority => EffectKind::Ambulance,
            IncidentKind::ElderlyCrossing => EffectKind::Elderly,
        };
        IncidentEffect { kind, window: self.window, lanes: self.capacity.clone() }
    }
}

pub const DEFAULT_ONSET_S: f64 = 300.0;

impl IncidentScript {
    pub fn preset(kind: IncidentKind) -> Self {
        IncidentScript {
            kind,
            start_s: None,
            end_s: None,
            type_label: None,
            narrative: None,
            approach: None,
            lanes: None,
            capacity: None,
            ambulances: None,
            through_min_green_s: None,
        }
    }

    pub fn resolve(&self, horizon_s: f64) -> ResolvedIncident {
        let blocked = |lanes: &[LaneId], m: f64| lanes.iter().map(|&lane| LaneMultiplier { lane, multiplier: m }).collect();
        let (label, narrative, approach, lanes, capacity, ambulances, pedestrians, through_min) = match self.kind {
            IncidentKind::CarAccident => (
                "car accident",
                "A collision between two cars has stopped traffic on every lane of the west approach right at the \
                 stop line. Police and a tow truck have been called; clearing the wreck will take a long time.",
                Approach::West,
                vec![4, 5, 6, 7],
                blocked(&[4, 5, 6, 7], 0.0),
                None,
                false,
                None,
            ),
            IncidentKind::RoadMaintenance => (
                "road maintenance",
                "Road maintenance has started on the west approach. Through lane 5 is fenced off for pavement \
                 repair and vehicles in through lane 6 squeeze past the work zone at reduced width.",
                Approach::West,
                vec![5, 6],
                vec![LaneMultiplier { lane: 5, multiplier: 0.0 }, LaneMultiplier { lane: 6, multiplier: 0.5 }],
                None,
                false,
                None,
            ),
            IncidentKind::AmbulancePriority => (
                "ambulance priority",
                "Ambulances on emergency calls are heading through the intersection westbound in through lane 5 \
                 and need to pass without being held at a red light. More ambulance runs along this route are \
                 expected throughout the hour.",
                Approach::West,
                vec![5],
                vec![],
                Some(AmbulanceSchedule { lane: 5, first_s: DEFAULT_ONSET_S, interval_s: 330.0, count: 10 }),
                false,
                None,
            ),
            IncidentKind::ElderlyCrossing => (
                "elderly pedestrians crossing",
                "Elderly residents of a nearby care home are crossing in the north-south direction beside the \
                 north-south through traffic. They walk much more slowly than other pedestrians and often cannot \
                 reach the far curb before their walk phase ends.",
                Approach::North,
                vec![9, 10, 11, 13, 14, 15],
                vec![],
                None,
                true,
                Some(30.0),
            ),
        };
        ResolvedIncident {
            kind: self.kind,
            window: (self.start_s.unwrap_or(DEFAULT_ONSET_S), self.end_s.unwrap_or(horizon_s)),
            type_label: self.type_label.clone().unwrap_or_else(|| label.to_string()),
            narrative: self.narrative.clone().unwrap_or_else(|| narrative.to_string()),
            approach: self.approach.unwrap_or(approach),
            lanes: self.lanes.clone().unwrap_or(lanes),
            capacity: self.capacity.clone().unwrap_or(capacity),
            ambulances: self.ambulances.or(ambulances),
            pedestrians,
            through_min_green_s: self.through_min_green_s.or(through_min),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingConfig {
    pub min_green_s: f64,
    pub max_green_s: f64,
    pub yellow_s: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig { min_green_s: 15.0, max_green_s: 45.0, yellow_s: 3.0 }
    }
}

fn default_horizon() -> f64 {
    3600.0
}
fn default_dt() -> f64 {
    1.0
}
fn default_k() -> usize {
    DEFAULT_K
}
fn default_q() -> u64 {
    60
}
fn default_theta_max() -> f64 {
    DEFAULT_THETA_MAX
}
fn default_clock() -> f64 {
    7.0 * 3600.0 + 30.0 * 60.0
}
fn default_retry() -> u32 {
    crate::agent::DEFAULT_RETRY_BUDGET
}
fn default_controller() -> ControllerKind {
    ControllerKind::MaxPressure
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub layout: IntersectionLayout,
    #[serde(default)]
    pub demand: DemandLevel,
    pub incident: IncidentScript,
    #[serde(default = "default_controller")]
    pub controller: ControllerKind,
    #[serde(default)]
    pub timing: TimingConfig,
    #[serde(default)]
    pub theta_min: f64,
    #[serde(default = "default_theta_max")]
    pub theta_max: f64,
    #[serde(default)]
    pub variant: Variant,
    /// Seed database for `llm_tlrs`; the bundled expert references when unset.
    #[serde(default)]
    pub seed_db: Option<PathBuf>,
    #[serde(default = "default_k")]
    pub k: usize,
    /// Agent invocation period, in steps.
    #[serde(default = "default_q")]
    pub q: u64,
    #[serde(default = "default_horizon")]
    pub horizon_s: f64,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    #[serde(default)]
    pub seed: u64,
    /// Clock time at t = 0, seconds after midnight; only used in incident text.
    #[serde(default = "default_clock")]
    pub clock_start_s: f64,
    #[serde(default = "default_retry")]
    pub retry_budget: u32,
}

impl ScenarioConfig {
    pub fn preset(kind: IncidentKind, demand: DemandLevel, controller: ControllerKind, variant: Variant, seed: u64) -> Self {
        ScenarioConfig {
            name: None,
            layout: IntersectionLayout::four_phase(),
            demand,
            incident: IncidentScript::preset(kind),
            controller,
            timing: TimingConfig::default(),
            theta_min: 0.0,
            theta_max: DEFAULT_THETA_MAX,
            variant,
            seed_db: None,
            k: DEFAULT_K,
            q: default_q(),
            horizon_s: default_horizon(),
            dt_s: default_dt(),
            seed,
            clock_start_s: default_clock(),
            retry_budget: default_retry(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| ConfigError::Json(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// `scenario_controller_demand_variant`, or the explicit name.
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            format!(
                "{}_{}_{}_{}",
                self.incident.kind.label(),
                self.controller.label(),
                self.demand.label(),
                self.variant.label()
            )
        })
    }

    pub fn steps(&self) -> u64 {
        (self.horizon_s / self.dt_s).round() as u64
    }

    pub fn incident(&self) -> ResolvedIncident {
        self.incident.resolve(self.horizon_s)
    }

    pub fn demand_profile(&self) -> Result<DemandProfile, ConfigError> {
        let mut profile = DemandProfile::from_volumes(&self.layout, &OVERSATURATED_VOLUMES, self.demand.scale())?;
        let inc = self.incident();
        if inc.pedestrians {
            profile.pedestrians = elderly_crossing_pedestrians();
        }
        if let Some(s) = inc.ambulances {
            profile.ambulances = s.arrivals();
        }
        profile.validate()?;
        Ok(profile)
    }

    pub fn signal_timing(&self) -> SignalTiming {
        let t = SignalTiming::uniform(self.layout.phase_count(), self.timing.min_green_s, self.timing.max_green_s, self.timing.yellow_s);
        match self.incident().through_min_green_s {
            Some(v) => t.with_through_minimum(&self.layout, v),
            None => t,
        }
    }

    pub fn nominal_params(&self) -> ControllerParams {
        ControllerParams::nominal(self.layout.lane_count(), self.theta_min, self.theta_max)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        self.layout.validate()?;
        if !(self.dt_s > 0.0 && self.dt_s.is_finite()) {
            return bad(format!("dt_s must be positive, got {}", self.dt_s));
        }
        if !(self.horizon_s > 0.0 && self.horizon_s.is_finite()) {
            return bad(format!("horizon_s must be positive, got {}", self.horizon_s));
        }
        if ((self.horizon_s / self.dt_s).round() * self.dt_s - self.horizon_s).abs() > 1e-9 {
            return bad("horizon_s must be a whole number of steps".into());
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.q == 0 {
            return bad("q must be at least 1".into());
        }
        if !(self.theta_min.is_finite() && self.theta_max.is_finite() && 0.0 <= self.theta_min && self.theta_min <= self.theta_max) {
            return bad(format!("parameter box [{}, {}] is invalid", self.theta_min, self.theta_max));
        }
        self.signal_timing().validate(self.layout.phase_count())?;
        let inc = self.incident();
        if inc.narrative.trim().is_empty() || inc.type_label.trim().is_empty() {
            return bad("incident narrative and type must be nonempty".into());
        }
        if inc.lanes.is_empty() {
            return bad("incident location needs at least one lane".into());
        }
        if let Some(l) = inc.lanes.iter().find(|&&l| l >= self.layout.lane_count()) {
            return bad(format!("incident lane {l} out of range"));
        }
        if let Some(s) = inc.ambulances {
            if s.lane >= self.layout.lane_count() || s.interval_s.is_nan() || s.interval_s < 0.0 {
                return bad("ambulance schedule is invalid".into());
            }
        }
        inc.effect().validate(self.layout.lane_count())?;
        if let ControllerKind::Mpc(MpcSettings { horizon_slots, .. }) = self.controller {
            if horizon_slots == 0 {
                return bad("MPC horizon must be at least one block".into());
            }
        }
        if self.seed_db.is_some() && !self.variant.uses_tlrs() {
            return bad(format!("seed_db is only meaningful for llm_tlrs, not {}", self.variant.label()));
        }
        self.demand_profile()?;
        Ok(())
    }
}
