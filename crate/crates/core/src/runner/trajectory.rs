use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::sim::{PhaseId, SignalTiming};

use super::RunError;

/// Signal and queue state at the start of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSnapshot {
    pub time_s: f64,
    /// Active phase; during yellow the phase being terminated.
    pub phase: PhaseId,
    pub yellow: bool,
    pub queue: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<StepSnapshot>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    time_s: f64,
    lane_id: usize,
    queue_veh: f64,
    phase_id: usize,
    yellow: u8,
}

impl Trajectory {
    /// One row per (step, lane).
    pub fn write_csv(&self, path: &Path) -> Result<(), RunError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
        for s in &self.steps {
            for (lane, q) in s.queue.iter().enumerate() {
                w.serialize(CsvRow { time_s: s.time_s, lane_id: lane, queue_veh: *q, phase_id: s.phase.0, yellow: s.yellow as u8 })
                    .map_err(|e| RunError::Io(e.to_string()))?;
            }
        }
        w.flush().map_err(|e| RunError::Io(e.to_string()))
    }

    pub fn intervals(&self) -> Vec<SignalInterval> {
        intervals_from(self.steps.iter().map(|s| (s.time_s, s.phase, s.yellow)))
    }
}

/// A maximal run of steps with the same phase and yellow flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalInterval {
    pub phase: PhaseId,
    pub yellow: bool,
    pub start_s: f64,
    pub steps: usize,
}

fn intervals_from(seq: impl Iterator<Item = (f64, PhaseId, bool)>) -> Vec<SignalInterval> {
    let mut out: Vec<SignalInterval> = Vec::new();
    for (t, phase, yellow) in seq {
        match out.last_mut() {
            Some(last) if last.phase == phase && last.yellow == yellow => last.steps += 1,
            _ => out.push(SignalInterval { phase, yellow, start_s: t, steps: 1 }),
        }
    }
    out
}

/// Reads the signal sequence back from a trajectory CSV.
pub fn read_signal_intervals(path: &Path) -> Result<Vec<SignalInterval>, RunError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
    let mut seq = Vec::new();
    let mut last_time = None;
    for row in r.deserialize::<CsvRow>() {
        let row = row.map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
        if last_time != Some(row.time_s) {
            seq.push((row.time_s, PhaseId(row.phase_id), row.yellow == 1));
            last_time = Some(row.time_s);
        }
    }
    Ok(intervals_from(seq.into_iter()))
}

/// Checks green bounds and yellow length. The final interval may be cut by
/// the horizon and is only checked against the maximum.
pub fn check_signal_legality(intervals: &[SignalInterval], timing: &SignalTiming, dt: f64) -> Result<(), String> {
    let yellow_steps = (timing.yellow / dt).round() as usize;
    let max_steps = (timing.max_green / dt).round() as usize;
    for (i, iv) in intervals.iter().enumerate() {
        let last = i + 1 == intervals.len();
        if iv.yellow {
            if !last && iv.steps != yellow_steps {
                return Err(format!("yellow at t = {} lasts {} steps, expected {yellow_steps}", iv.start_s, iv.steps));
            }
            if i == 0 || intervals[i - 1].yellow || intervals[i - 1].phase != iv.phase {
                return Err(format!("yellow at t = {} does not follow a green of phase {}", iv.start_s, iv.phase));
            }
            continue;
        }
        if i > 0 && !intervals[i - 1].yellow && yellow_steps > 0 {
            return Err(format!("phase {} at t = {} starts without a yellow", iv.phase, iv.start_s));
        }
        let min_steps = (timing.min_green(iv.phase) / dt).round() as usize;
        if iv.steps > max_steps || (!last && iv.steps < min_steps) {
            return Err(format!(
                "phase {} green at t = {} lasts {} s, allowed [{}, {}]",
                iv.phase,
                iv.start_s,
                iv.steps as f64 * dt,
                timing.min_green(iv.phase),
                timing.max_green
            ));
        }
    }
    Ok(())
}
