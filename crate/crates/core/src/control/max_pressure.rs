use crate::sim::{IntersectionLayout, PhaseId, SignalState};

use super::{ControlError, ControllerParams};

/// Weighted pressure of each phase, in phase order.
///
/// Pressure of a movement is upstream minus downstream queue; every movement
/// at an isolated intersection leaves through an exit link with no queue, so
/// it reduces to the upstream lane queue.
pub fn phase_pressures(
    queue: &[f64],
    params: &ControllerParams,
    layout: &IntersectionLayout,
) -> Result<Vec<f64>, ControlError> {
    params.check_dimension(layout.lane_count())?;
    if queue.len() != layout.lane_count() {
        return Err(ControlError::Dimension { expected: layout.lane_count(), got: queue.len() });
    }
    Ok(layout
        .phases
        .iter()
        .map(|p| p.lanes.iter().map(|&k| params.weights[k] * queue[k]).sum())
        .collect())
}

/// Picks the phase with the largest weighted pressure.
///
/// Ties go to the lowest phase id. While the active phase is below its
/// maximum green and attains the maximum it is kept; once it reaches the
/// maximum green it is excluded from the choice.
pub fn max_pressure_select(
    queue: &[f64],
    params: &ControllerParams,
    layout: &IntersectionLayout,
    signal: &SignalState,
) -> Result<PhaseId, ControlError> {
    let pressures = phase_pressures(queue, params, layout)?;
    let current = signal.active_phase;
    let forced = signal.must_switch();

    let mut best: Option<(PhaseId, f64)> = None;
    for (idx, &p) in pressures.iter().enumerate() {
        let id = PhaseId::from_index(idx);
        if forced && id == current {
            continue;
        }
        if best.is_none_or(|(_, b)| p > b) {
            best = Some((id, p));
        }
    }
    let (choice, max) = best.ok_or_else(|| ControlError::Config("layout has a single phase".into()))?;
    if !forced && pressures[current.index()] == max {
        return Ok(current);
    }
    Ok(choice)
}
