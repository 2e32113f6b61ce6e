use serde::{Deserialize, Serialize};

use super::ControlError;

/// Per-lane saturation-flow weights the agent is allowed to tune, together
/// with their feasible box. Max-pressure uses them as pressure weights, MPC as
/// the saturation flows of its internal queue model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    /// veh/h per incoming lane.
    pub weights: Vec<f64>,
    pub theta_min: f64,
    pub theta_max: f64,
    /// Decision step at which these weights were installed.
    pub version: u64,
}

pub const DEFAULT_THETA_MAX: f64 = 1800.0;

impl ControllerParams {
    /// Every lane at `theta_max`, i.e. the nominal saturation flow.
    pub fn nominal(lanes: usize, theta_min: f64, theta_max: f64) -> Self {
        ControllerParams { weights: vec![theta_max; lanes], theta_min, theta_max, version: 0 }
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Self {
        ControllerParams { weights, ..self.clone() }
    }

    pub fn validate_box(&self) -> Result<(), ControlError> {
        if !(self.theta_min.is_finite() && self.theta_max.is_finite() && self.theta_min <= self.theta_max) {
            return Err(ControlError::Config(format!(
                "parameter box [{}, {}] is invalid",
                self.theta_min, self.theta_max
            )));
        }
        Ok(())
    }

    pub fn check_dimension(&self, lanes: usize) -> Result<(), ControlError> {
        if self.weights.len() != lanes {
            return Err(ControlError::Dimension { expected: lanes, got: self.weights.len() });
        }
        Ok(())
    }

    /// Clamps every weight into `[theta_min, theta_max]`.
    pub fn clamped(mut self) -> Self {
        for w in &mut self.weights {
            *w = w.clamp(self.theta_min, self.theta_max);
        }
        self
    }

    pub fn is_within_box(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite() && *w >= self.theta_min && *w <= self.theta_max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamp_to_upper_bound() {
        let p = ControllerParams::nominal(3, 0.0, 1800.0).with_weights(vec![2500.0, -10.0, 900.0]).clamped();
        assert_eq!(p.weights, vec![1800.0, 0.0, 900.0]);
        assert!(p.is_within_box());
    }

    #[test]
    fn inverted_box_is_rejected() {
        let p = ControllerParams::nominal(2, 10.0, 5.0);
        assert!(p.validate_box().is_err());
    }
}
