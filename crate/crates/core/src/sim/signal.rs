use serde::{Deserialize, Serialize};

use super::layout::{IntersectionLayout, PhaseId};
use super::SimError;

const EPS: f64 = 1e-9;

/// Green-time constraints. `min_green` is per phase so through phases can be
/// lengthened for slow pedestrians without touching the turning phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalTiming {
    pub min_green: Vec<f64>,
    pub max_green: f64,
    pub yellow: f64,
}

impl SignalTiming {
    pub fn uniform(phases: usize, min_green: f64, max_green: f64, yellow: f64) -> Self {
        SignalTiming { min_green: vec![min_green; phases], max_green, yellow }
    }

    /// Raises the minimum green of every through phase to at least `through_min`.
    pub fn with_through_minimum(mut self, layout: &IntersectionLayout, through_min: f64) -> Self {
        for phase in &layout.phases {
            if phase.through {
                let g = &mut self.min_green[phase.id.index()];
                *g = g.max(through_min);
            }
        }
        self
    }

    pub fn min_green(&self, phase: PhaseId) -> f64 {
        self.min_green[phase.index()]
    }

    /// Smallest minimum green over all phases.
    pub fn base_min_green(&self) -> f64 {
        self.min_green.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self, phases: usize) -> Result<(), SimError> {
        if self.min_green.len() != phases {
            return Err(SimError::Signal(format!(
                "{} minimum greens for {phases} phases",
                self.min_green.len()
            )));
        }
        if !(self.yellow >= 0.0 && self.yellow.is_finite()) {
            return Err(SimError::Signal(format!("yellow time {} is invalid", self.yellow)));
        }
        for (idx, g) in self.min_green.iter().enumerate() {
            if g.is_nan() || *g <= 0.0 || *g > self.max_green {
                return Err(SimError::Signal(format!(
                    "phase {} minimum green {g} not in (0, {}]",
                    idx + 1,
                    self.max_green
                )));
            }
        }
        Ok(())
    }
}

/// Something the pedestrian and logging code needs to know about.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignalEvent {
    GreenStarted { phase: PhaseId },
    GreenEnded { phase: PhaseId, duration: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalState {
    pub active_phase: PhaseId,
    pub elapsed_green: f64,
    pub in_yellow: bool,
    pub yellow_remaining: f64,
    /// Phase that turns green when the current yellow ends.
    pub next_phase: Option<PhaseId>,
    pub timing: SignalTiming,
}

impl SignalState {
    /// Starts green on `phase` at elapsed 0.
    pub fn new(phase: PhaseId, timing: SignalTiming) -> Self {
        SignalState {
            active_phase: phase,
            elapsed_green: 0.0,
            in_yellow: false,
            yellow_remaining: 0.0,
            next_phase: None,
            timing,
        }
    }

    pub fn min_green(&self) -> f64 {
        self.timing.min_green(self.active_phase)
    }

    pub fn max_green(&self) -> f64 {
        self.timing.max_green
    }

    /// Controller may pick a different phase now.
    pub fn can_switch(&self) -> bool {
        !self.in_yellow && self.elapsed_green + EPS >= self.min_green()
    }

    /// Controller has to pick a different phase now.
    pub fn must_switch(&self) -> bool {
        !self.in_yellow && self.elapsed_green + EPS >= self.max_green()
    }

    /// Lanes discharging during the current step; nothing moves on yellow.
    pub fn green_mask(&self, layout: &IntersectionLayout) -> Vec<bool> {
        if self.in_yellow {
            vec![false; layout.lane_count()]
        } else {
            layout.green_mask(self.active_phase)
        }
    }

    /// Applies a controller decision taken at a decision point. Choosing the
    /// active phase holds it; anything else ends the green and starts yellow.
    pub fn apply_decision(&mut self, phase: PhaseId) -> Vec<SignalEvent> {
        if self.in_yellow || phase == self.active_phase {
            return vec![];
        }
        let ended = SignalEvent::GreenEnded { phase: self.active_phase, duration: self.elapsed_green };
        if self.timing.yellow <= EPS {
            self.active_phase = phase;
            self.elapsed_green = 0.0;
            return vec![ended, SignalEvent::GreenStarted { phase }];
        }
        self.in_yellow = true;
        self.yellow_remaining = self.timing.yellow;
        self.next_phase = Some(phase);
        vec![ended]
    }

    /// Advances the clock by `dt` after the plant step.
    pub fn advance(&mut self, dt: f64) -> Option<SignalEvent> {
        if self.in_yellow {
            self.yellow_remaining = (self.yellow_remaining - dt).max(0.0);
            if self.yellow_remaining <= EPS {
                self.in_yellow = false;
                self.yellow_remaining = 0.0;
                self.active_phase = self.next_phase.take().unwrap_or(self.active_phase);
                self.elapsed_green = 0.0;
                return Some(SignalEvent::GreenStarted { phase: self.active_phase });
            }
            None
        } else {
            self.elapsed_green += dt;
            None
        }
    }
}
