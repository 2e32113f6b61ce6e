//! Lower-level signal controllers parameterised by per-lane weights.

mod max_pressure;
mod mpc;
mod params;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{IntersectionLayout, PhaseId, SignalState};

pub use max_pressure::{max_pressure_select, phase_pressures};
pub use mpc::{mpc_plan, tie_tolerance, MpcSettings, PhasePlan, PlanSegment};
pub use params::{ControllerParams, DEFAULT_THETA_MAX};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("controller configuration: {0}")]
    Config(String),
    #[error("parameter vector has {got} entries, layout has {expected} lanes")]
    Dimension { expected: usize, got: usize },
    #[error("controller asked to decide while the signal is in yellow")]
    NotAtDecisionPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ControllerKind {
    MaxPressure,
    Mpc(MpcSettings),
}

impl ControllerKind {
    pub fn label(&self) -> &'static str {
        match self {
            ControllerKind::MaxPressure => "max_pressure",
            ControllerKind::Mpc(_) => "mpc",
        }
    }
}

/// A controller with its current parameters and the nominal arrival forecast
/// it uses for prediction.
#[derive(Debug, Clone)]
pub struct Controller {
    pub kind: ControllerKind,
    pub params: ControllerParams,
    pub forecast_per_s: Vec<f64>,
    pub last_plan: Option<PhasePlan>,
}

impl Controller {
    pub fn new(kind: ControllerKind, params: ControllerParams, forecast_per_s: Vec<f64>) -> Result<Self, ControlError> {
        params.validate_box()?;
        if !params.is_within_box() {
            return Err(ControlError::Config("initial parameters lie outside their box".into()));
        }
        if forecast_per_s.len() != params.weights.len() {
            return Err(ControlError::Dimension { expected: params.weights.len(), got: forecast_per_s.len() });
        }
        Ok(Controller { kind, params, forecast_per_s, last_plan: None })
    }

    /// Chooses the phase to run from now on. Returns the active phase when a
    /// switch is not yet allowed.
    pub fn decide(
        &mut self,
        queue: &[f64],
        layout: &IntersectionLayout,
        signal: &SignalState,
        dt: f64,
    ) -> Result<PhaseId, ControlError> {
        if signal.in_yellow {
            return Err(ControlError::NotAtDecisionPoint);
        }
        if !signal.can_switch() {
            return Ok(signal.active_phase);
        }
        match &self.kind {
            ControllerKind::MaxPressure => max_pressure_select(queue, &self.params, layout, signal),
            ControllerKind::Mpc(settings) => {
                let plan = mpc_plan(queue, &self.params, &self.forecast_per_s, layout, signal, settings, dt)?;
                let phase = plan.first_phase();
                self.last_plan = Some(plan);
                Ok(phase)
            }
        }
    }

    /// Installs a new parameter vector, clamped into the box. A vector of the
    /// wrong length is rejected and the current one kept.
    pub fn apply_params(&mut self, weights: &[f64], version: u64) -> Result<&ControllerParams, ControlError> {
        if weights.len() != self.params.weights.len() {
            return Err(ControlError::Dimension { expected: self.params.weights.len(), got: weights.len() });
        }
        if weights.iter().any(|w| w.is_nan()) {
            return Err(ControlError::Config("parameter vector contains NaN".into()));
        }
        let next = self.params.with_weights(weights.to_vec()).clamped();
        self.params = ControllerParams { version, ..next };
        Ok(&self.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn controller() -> Controller {
        Controller::new(ControllerKind::MaxPressure, ControllerParams::nominal(16, 0.0, 1800.0), vec![0.0; 16])
            .unwrap()
    }

    #[test]
    fn apply_params_clamps_and_stamps_version() {
        let mut c = controller();
        let mut w = vec![1800.0; 16];
        w[3] = 2500.0;
        w[4] = -3.0;
        let p = c.apply_params(&w, 7).unwrap();
        assert_eq!(p.weights[3], 1800.0);
        assert_eq!(p.weights[4], 0.0);
        assert_eq!(p.version, 7);
    }

    #[test]
    fn wrong_dimension_keeps_previous_parameters() {
        let mut c = controller();
        let before = c.params.clone();
        let err = c.apply_params(&[0.0; 15], 3).unwrap_err();
        assert_eq!(err, ControlError::Dimension { expected: 16, got: 15 });
        assert_eq!(c.params, before);
    }

    #[test]
    fn kind_round_trips_through_json() {
        for kind in [ControllerKind::MaxPressure, ControllerKind::Mpc(MpcSettings::default())] {
            let s = serde_json::to_string(&kind).unwrap();
            assert_eq!(serde_json::from_str::<ControllerKind>(&s).unwrap(), kind);
        }
        let parsed: ControllerKind = serde_json::from_str(r#"{"type":"mpc","horizon_slots":2}"#).unwrap();
        assert_eq!(parsed, ControllerKind::Mpc(MpcSettings { horizon_slots: 2, slot_s: None }));
    }
}
