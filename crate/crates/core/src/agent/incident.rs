use serde::{Deserialize, Serialize};

use crate::sim::{Approach, LaneId};

/// Textual incident report handed to the agent: time, location and type,
/// plus free narrative. It carries no plant ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidentDescription {
    pub time_s: f64,
    /// Wall-clock stamp, e.g. `08:05:00`.
    pub stamp: String,
    pub approach: Approach,
    pub lanes: Vec<LaneId>,
    pub kind: String,
    pub narrative: String,
}

/// `HH:MM:SS` of `clock_start_s + t` seconds after midnight.
pub fn clock_stamp(clock_start_s: f64, t: f64) -> String {
    let total = (clock_start_s + t).max(0.0).round() as u64;
    format!("{:02}:{:02}:{:02}", (total / 3600) % 24, (total / 60) % 60, total % 60)
}

impl IncidentDescription {
    pub fn render(&self) -> String {
        let lanes = self.lanes.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(", ");
        let noun = if self.lanes.len() == 1 { "lane" } else { "lanes" };
        format!(
            "Time: {} (t = {} s). Location: {} approach, {noun} {lanes}. Type: {}. {}",
            self.stamp,
            self.time_s,
            self.approach.name(),
            self.kind,
            self.narrative.trim()
        )
    }
}

/// Reasoning the generator attaches to its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningTrace {
    pub tau_cond: String,
    pub tau_ctrl: String,
    pub affected_lanes: Vec<LaneId>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_has_time_location_type() {
        let e = IncidentDescription {
            time_s: 300.0,
            stamp: clock_stamp(7.0 * 3600.0 + 1800.0, 300.0),
            approach: Approach::West,
            lanes: vec![4, 5, 6, 7],
            kind: "car accident".into(),
            narrative: "A collision blocks the west approach.".into(),
        };
        assert_eq!(
            e.render(),
            "Time: 07:35:00 (t = 300 s). Location: west approach, lanes 4, 5, 6, 7. Type: car accident. \
             A collision blocks the west approach."
        );
    }
}
