//! Ambulances are tracked as marked entities on top of the fluid queue. An
//! ambulance waits for the vehicles that were queued ahead of it to discharge,
//! and for a green on its own lane; every second spent doing either counts as
//! delay.

use super::plant::StepReport;
use super::state::TrafficState;

const EPS: f64 = 1e-9;

/// Updates every ambulance for the step described by `report`.
pub fn advance_ambulance(state: &mut TrafficState, report: &StepReport, dt: f64) {
    let t = report.time;
    for amb in state.ambulances.iter_mut() {
        if amb.departure_time.is_some() || amb.arrival_time > t + EPS {
            continue;
        }
        let ahead = *amb.queue_ahead.get_or_insert(report.queue_before[amb.lane]);
        let green = report.green[amb.lane];
        if green && ahead <= EPS {
            amb.departure_time = Some(t);
            continue;
        }
        amb.delay += dt;
        if green {
            amb.queue_ahead = Some((ahead - report.departures[amb.lane]).max(0.0));
        }
    }
}
