//! Pedestrians step off the curb only when the green serving their crosswalk
//! begins. A crossing is completed when that green lasts at least
//! `crossing_length / speed`; otherwise the pedestrian is caught by the phase
//! change, finishes at the next green serving them, and is not counted as a
//! completed crossing.

use super::layout::{IntersectionLayout, PhaseId};
use super::signal::SignalEvent;
use super::state::TrafficState;

const EPS: f64 = 1e-9;

pub fn crossing_time(layout: &IntersectionLayout, speed_mps: f64) -> f64 {
    layout.crossing_length_m / speed_mps
}

/// Applies signal events of the current step at time `t`.
pub fn advance_pedestrians(state: &mut TrafficState, events: &[SignalEvent], layout: &IntersectionLayout, t: f64) {
    for event in events {
        match *event {
            SignalEvent::GreenStarted { phase } => start_crossing(state, layout, phase, t),
            SignalEvent::GreenEnded { phase, duration } => end_green(state, layout, phase, duration),
        }
    }
}

fn serves(layout: &IntersectionLayout, phase: PhaseId, dir: super::layout::WalkDirection) -> bool {
    layout.phase(phase).is_some_and(|p| p.pedestrians.contains(&dir))
}

fn start_crossing(state: &mut TrafficState, layout: &IntersectionLayout, phase: PhaseId, t: f64) {
    for ped in state.pedestrians.iter_mut() {
        if ped.finished || ped.crossing_since.is_some() || ped.arrival_time > t + EPS {
            continue;
        }
        if serves(layout, phase, ped.direction) {
            ped.crossing_since = Some(t);
            ped.attempts += 1;
        }
    }
}

fn end_green(state: &mut TrafficState, layout: &IntersectionLayout, phase: PhaseId, duration: f64) {
    for ped in state.pedestrians.iter_mut() {
        if ped.crossing_since.is_none() || !serves(layout, phase, ped.direction) {
            continue;
        }
        ped.crossing_since = None;
        if duration + EPS >= crossing_time(layout, ped.speed_mps) {
            ped.finished = true;
            ped.completed = ped.attempts == 1;
        } else if ped.attempts >= 2 {
            // Stranded pedestrians clear the road during their second green.
            ped.finished = true;
        }
    }
}

/// Resolves crossings still in progress at the end of the run using the
/// green time elapsed so far.
pub fn finalize_pedestrians(state: &mut TrafficState, layout: &IntersectionLayout, active: PhaseId, elapsed: f64) {
    for ped in state.pedestrians.iter_mut() {
        if ped.crossing_since.is_some()
            && serves(layout, active, ped.direction)
            && elapsed + EPS >= crossing_time(layout, ped.speed_mps)
        {
            ped.crossing_since = None;
            ped.finished = true;
            ped.completed = ped.attempts == 1;
        }
    }
}
