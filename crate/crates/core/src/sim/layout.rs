use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::SimError;

/// Index of an incoming lane, 0-based, approach-major.
pub type LaneId = usize;

/// Signal phase identifier. Ids are 1-based to match how phases are usually
/// numbered on a timing sheet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhaseId(pub usize);

impl PhaseId {
    pub fn index(self) -> usize {
        self.0 - 1
    }

    pub fn from_index(idx: usize) -> Self {
        PhaseId(idx + 1)
    }
}

impl fmt::Display for PhaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    East,
    West,
    North,
    South,
}

impl Approach {
    pub const ALL: [Approach; 4] = [Approach::East, Approach::West, Approach::North, Approach::South];

    pub fn name(self) -> &'static str {
        match self {
            Approach::East => "east",
            Approach::West => "west",
            Approach::North => "north",
            Approach::South => "south",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Movement {
    Left,
    Through,
    Right,
}

impl Movement {
    pub fn name(self) -> &'static str {
        match self {
            Movement::Left => "left turn",
            Movement::Through => "through",
            Movement::Right => "right turn",
        }
    }
}

/// Walking direction of a pedestrian flow, named by origin and destination
/// side of the intersection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkDirection {
    EastWest,
    WestEast,
    NorthSouth,
    SouthNorth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachSpec {
    pub approach: Approach,
    /// Movement served by each incoming lane, ordered from the median outwards.
    pub lanes: Vec<Movement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub id: PhaseId,
    pub name: String,
    /// Incoming lanes discharging during this phase. Downstream links of an
    /// isolated intersection are exits, so each movement maps to its upstream lane.
    pub lanes: Vec<LaneId>,
    /// Pedestrian crossings walking concurrently with this phase.
    #[serde(default)]
    pub pedestrians: Vec<WalkDirection>,
    /// Phase carries through traffic; used for the pedestrian minimum green.
    #[serde(default)]
    pub through: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneInfo {
    pub id: LaneId,
    pub approach: Approach,
    pub movement: Movement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionLayout {
    pub approaches: Vec<ApproachSpec>,
    pub phases: Vec<Phase>,
    /// Length of one pedestrian crossing in metres.
    pub crossing_length_m: f64,
}

impl Default for IntersectionLayout {
    fn default() -> Self {
        Self::four_phase()
    }
}

impl IntersectionLayout {
    /// Four approaches (E, W, N, S), each with one left, two through and one
    /// right-turn lane, under the EW-through / EW-left / NS-through / NS-left
    /// scheme. Right turns run with the through phase.
    pub fn four_phase() -> Self {
        use Movement::*;
        let approaches = Approach::ALL
            .iter()
            .map(|&approach| ApproachSpec { approach, lanes: vec![Left, Through, Through, Right] })
            .collect();
        // E: 0..4, W: 4..8, N: 8..12, S: 12..16
        let phases = vec![
            Phase {
                id: PhaseId(1),
                name: "EW through".into(),
                lanes: vec![1, 2, 3, 5, 6, 7],
                pedestrians: vec![WalkDirection::EastWest, WalkDirection::WestEast],
                through: true,
            },
            Phase {
                id: PhaseId(2),
                name: "EW left".into(),
                lanes: vec![0, 4],
                pedestrians: vec![],
                through: false,
            },
            Phase {
                id: PhaseId(3),
                name: "NS through".into(),
                lanes: vec![9, 10, 11, 13, 14, 15],
                pedestrians: vec![WalkDirection::NorthSouth, WalkDirection::SouthNorth],
                through: true,
            },
            Phase {
                id: PhaseId(4),
                name: "NS left".into(),
                lanes: vec![8, 12],
                pedestrians: vec![],
                through: false,
            },
        ];
        IntersectionLayout { approaches, phases, crossing_length_m: 28.0 }
    }

    pub fn lanes(&self) -> Vec<LaneInfo> {
        let mut out = Vec::new();
        for spec in &self.approaches {
            for &movement in &spec.lanes {
                out.push(LaneInfo { id: out.len(), approach: spec.approach, movement });
            }
        }
        out
    }

    pub fn lane_count(&self) -> usize {
        self.approaches.iter().map(|a| a.lanes.len()).sum()
    }

    pub fn phase_count(&self) -> usize {
        self.phases.len()
    }

    pub fn phase(&self, id: PhaseId) -> Option<&Phase> {
        self.phases.get(id.0.wrapping_sub(1)).filter(|p| p.id == id)
    }

    pub fn phase_ids(&self) -> impl Iterator<Item = PhaseId> + '_ {
        self.phases.iter().map(|p| p.id)
    }

    /// Lanes of one approach, in lane order.
    pub fn approach_lanes(&self, approach: Approach) -> Vec<LaneId> {
        self.lanes().into_iter().filter(|l| l.approach == approach).map(|l| l.id).collect()
    }

    /// Green mask for `phase`: `true` for each lane that may discharge.
    pub fn green_mask(&self, phase: PhaseId) -> Vec<bool> {
        let mut mask = vec![false; self.lane_count()];
        if let Some(p) = self.phase(phase) {
            for &lane in &p.lanes {
                mask[lane] = true;
            }
        }
        mask
    }

    /// Phase that lets a pedestrian walking `dir` cross, if any.
    pub fn pedestrian_phase(&self, dir: WalkDirection) -> Option<PhaseId> {
        self.phases.iter().find(|p| p.pedestrians.contains(&dir)).map(|p| p.id)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let n = self.lane_count();
        if n == 0 {
            return Err(SimError::Layout("layout has no incoming lanes".into()));
        }
        if !(self.crossing_length_m > 0.0 && self.crossing_length_m.is_finite()) {
            return Err(SimError::Layout(format!(
                "crossing length must be positive, got {}",
                self.crossing_length_m
            )));
        }
        let mut covered = vec![false; n];
        let mut seen: Vec<BTreeSet<LaneId>> = Vec::new();
        for (idx, phase) in self.phases.iter().enumerate() {
            if phase.id != PhaseId::from_index(idx) {
                return Err(SimError::Layout(format!(
                    "phase ids must be 1..=n in order, found {} at position {}",
                    phase.id,
                    idx + 1
                )));
            }
            let set: BTreeSet<LaneId> = phase.lanes.iter().copied().collect();
            if set.is_empty() {
                return Err(SimError::Layout(format!("phase {} serves no lane", phase.id)));
            }
            for &lane in &set {
                if lane >= n {
                    return Err(SimError::Layout(format!(
                        "phase {} references lane {lane} but only {n} lanes exist",
                        phase.id
                    )));
                }
                covered[lane] = true;
            }
            if seen.contains(&set) {
                return Err(SimError::Layout(format!("phase {} duplicates another phase", phase.id)));
            }
            seen.push(set);
        }
        if let Some(lane) = covered.iter().position(|c| !c) {
            return Err(SimError::Layout(format!("lane {lane} is not served by any phase")));
        }
        Ok(())
    }
}
