use serde::{Deserialize, Serialize};

use super::layout::LaneId;
use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectKind {
    Accident,
    Maintenance,
    Ambulance,
    Elderly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneMultiplier {
    pub lane: LaneId,
    pub multiplier: f64,
}

/// Ground-truth capacity change on the plant. Never shown to the agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidentEffect {
    pub kind: EffectKind,
    /// Active for `start <= t < end`, in seconds.
    pub window: (f64, f64),
    #[serde(default)]
    pub lanes: Vec<LaneMultiplier>,
}

impl IncidentEffect {
    pub fn is_active(&self, t: f64) -> bool {
        self.window.0 <= t && t < self.window.1
    }

    pub fn validate(&self, lane_count: usize) -> Result<(), SimError> {
        let (start, end) = self.window;
        if !(start.is_finite() && end.is_finite() && start <= end) {
            return Err(SimError::Incident(format!("window [{start}, {end}] is not well ordered")));
        }
        for lm in &self.lanes {
            if lm.lane >= lane_count {
                return Err(SimError::Incident(format!("lane {} out of range", lm.lane)));
            }
            if !(0.0..=1.0).contains(&lm.multiplier) {
                return Err(SimError::Incident(format!(
                    "capacity multiplier {} on lane {} outside [0, 1]",
                    lm.multiplier, lm.lane
                )));
            }
        }
        Ok(())
    }
}

/// Product of the multipliers of every effect active at time `t`.
pub fn capacity_multipliers(effects: &[IncidentEffect], lane_count: usize, t: f64) -> Vec<f64> {
    let mut m = vec![1.0; lane_count];
    for effect in effects.iter().filter(|e| e.is_active(t)) {
        for lm in &effect.lanes {
            m[lm.lane] *= lm.multiplier;
        }
    }
    m
}
