//! Finite-horizon store-and-forward MPC solved by constrained enumeration.
//!
//! A plan is a sequence of `H` decision blocks. Holding the active phase adds
//! one slot of green (`slot + yellow` seconds, so a hold block is as long as
//! the shortest switch block); the first block is shortened to whatever green
//! is left before the maximum. Switching to another phase costs one yellow
//! followed by that phase's minimum green. The objective is the sum of total
//! queue over every model second of the horizon, i.e. vehicle-seconds of
//! delay. Only the first block is executed.
//!
//! The search is depth-first over phase sequences. Partial plans that reach
//! the same (block, phase, elapsed green, time) are compared, and a partial
//! plan whose cost and every lane queue are no better than an earlier one is
//! cut: queue dynamics are monotone in the queue, so it cannot end cheaper.
//! Among plans within [`tie_tolerance`] of each other the first one found wins.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::sim::{IntersectionLayout, PhaseId, SignalState};

use super::{ControlError, ControllerParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpcSettings {
    /// Number of decision blocks `H`.
    pub horizon_slots: usize,
    /// Green length of a hold block, seconds. Defaults to the smallest minimum green.
    #[serde(default)]
    pub slot_s: Option<f64>,
}

impl Default for MpcSettings {
    fn default() -> Self {
        MpcSettings { horizon_slots: 3, slot_s: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanSegment {
    pub phase: PhaseId,
    pub yellow_s: f64,
    pub green_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePlan {
    pub segments: Vec<PlanSegment>,
    /// Vehicle-seconds of queueing predicted over the horizon.
    pub objective: f64,
    pub horizon_s: f64,
}

impl PhasePlan {
    /// Phase the controller should run now.
    pub fn first_phase(&self) -> PhaseId {
        self.segments[0].phase
    }

    /// Checks green bounds against `signal`, which must be the state the plan
    /// was computed from. The last green may be cut short by the horizon.
    pub fn is_legal(&self, signal: &SignalState) -> bool {
        let t = &signal.timing;
        let mut phase = signal.active_phase;
        let mut green = signal.elapsed_green;
        for seg in &self.segments {
            if seg.phase != phase {
                if green + 1e-9 < t.min_green(phase) || (seg.yellow_s - t.yellow).abs() > 1e-9 {
                    return false;
                }
                phase = seg.phase;
                green = 0.0;
            } else if seg.yellow_s != 0.0 {
                return false;
            }
            green += seg.green_s;
            if green > t.max_green + 1e-9 {
                return false;
            }
        }
        true
    }
}

/// Fixed inputs of one planning problem in integer model steps.
struct Problem<'a> {
    green_sets: Vec<Vec<bool>>,
    arrivals: Vec<f64>,
    capacity: Vec<f64>,
    dt: f64,
    yellow: u32,
    min_green: Vec<u32>,
    max_green: u32,
    hold: u32,
    horizon_blocks: usize,
    horizon_steps: u32,
    _layout: &'a IntersectionLayout,
}

impl Problem<'_> {
    /// Runs `steps` model steps with `green` lanes open (none when `None`),
    /// stopping at the horizon. Returns the number of steps actually run.
    fn run(&self, queue: &mut [f64], cost: &mut f64, green: Option<usize>, steps: u32, t: u32) -> u32 {
        let n = steps.min(self.horizon_steps.saturating_sub(t));
        for _ in 0..n {
            let total: f64 = queue.iter().sum();
            *cost += total * self.dt;
            for (k, q) in queue.iter_mut().enumerate() {
                let available = *q + self.arrivals[k];
                let out = match green {
                    Some(p) if self.green_sets[p][k] => available.min(self.capacity[k]),
                    _ => 0.0,
                };
                *q = available - out;
            }
        }
        n
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct NodeKey {
    block: usize,
    phase: usize,
    elapsed: u32,
    t: u32,
}

struct Search<'p, 'a> {
    problem: &'p Problem<'a>,
    labels: HashMap<NodeKey, Vec<(f64, Vec<f64>)>>,
    best: Option<(f64, Vec<PlanSegment>)>,
    path: Vec<PlanSegment>,
}

impl Search<'_, '_> {
    fn dominated(&mut self, key: NodeKey, cost: f64, queue: &[f64]) -> bool {
        let entry = self.labels.entry(key).or_default();
        let hit = entry
            .iter()
            .any(|(c, q)| *c <= cost && q.iter().zip(queue).all(|(a, b)| a <= b));
        if !hit {
            entry.push((cost, queue.to_vec()));
        }
        hit
    }

    fn explore(&mut self, block: usize, t: u32, phase: usize, elapsed: u32, queue: &[f64], cost: f64) {
        let pr = self.problem;
        if block == pr.horizon_blocks || t >= pr.horizon_steps {
            if self.best.as_ref().is_none_or(|(b, _)| cost < *b - tie_tolerance(*b)) {
                self.best = Some((cost, self.path.clone()));
            }
            return;
        }
        if self.dominated(NodeKey { block, phase, elapsed, t }, cost, queue) {
            return;
        }
        let phases = pr.green_sets.len();
        let order = std::iter::once(phase).chain((0..phases).filter(|&p| p != phase));
        for next in order {
            let mut q = queue.to_vec();
            let mut c = cost;
            if next == phase {
                let hold = if block == 0 { pr.hold.min(pr.max_green.saturating_sub(elapsed)) } else { pr.hold };
                if hold == 0 || elapsed + hold > pr.max_green {
                    continue;
                }
                let ran = pr.run(&mut q, &mut c, Some(phase), hold, t);
                self.path.push(PlanSegment {
                    phase: PhaseId::from_index(phase),
                    yellow_s: 0.0,
                    green_s: ran as f64 * pr.dt,
                });
                self.explore(block + 1, t + hold, phase, elapsed + hold, &q, c);
            } else {
                if elapsed < pr.min_green[phase] {
                    continue;
                }
                let y = pr.run(&mut q, &mut c, None, pr.yellow, t);
                let g = pr.run(&mut q, &mut c, Some(next), pr.min_green[next], t + y);
                self.path.push(PlanSegment {
                    phase: PhaseId::from_index(next),
                    yellow_s: pr.yellow as f64 * pr.dt,
                    green_s: g as f64 * pr.dt,
                });
                self.explore(block + 1, t + pr.yellow + pr.min_green[next], next, pr.min_green[next], &q, c);
            }
            self.path.pop();
        }
    }
}

/// Plans whose costs differ by less than this are treated as equal, so the
/// earlier one in search order (holding the current phase first) is kept
/// instead of one that wins only through rounding.
pub fn tie_tolerance(cost: f64) -> f64 {
    1e-9 * cost.abs().max(1.0)
}

fn to_steps(seconds: f64, dt: f64) -> u32 {
    (seconds / dt).round().max(0.0) as u32
}

/// Solves the finite-horizon problem from the observed `queue`.
///
/// `demand_per_s` is the forecast arrival rate per lane in veh/s and
/// `params.weights` the saturation flows (veh/h) the model assumes.
pub fn mpc_plan(
    queue: &[f64],
    params: &ControllerParams,
    demand_per_s: &[f64],
    layout: &IntersectionLayout,
    signal: &SignalState,
    settings: &MpcSettings,
    dt: f64,
) -> Result<PhasePlan, ControlError> {
    let lanes = layout.lane_count();
    params.check_dimension(lanes)?;
    if queue.len() != lanes || demand_per_s.len() != lanes {
        return Err(ControlError::Dimension { expected: lanes, got: queue.len().min(demand_per_s.len()) });
    }
    if settings.horizon_slots == 0 {
        return Err(ControlError::Config("MPC horizon must be at least one block".into()));
    }
    if dt.is_nan() || dt <= 0.0 {
        return Err(ControlError::Config(format!("model step {dt} must be positive")));
    }
    let timing = &signal.timing;
    if timing.min_green.iter().any(|g| *g > timing.max_green) {
        return Err(ControlError::Config(format!(
            "minimum green exceeds maximum green {}",
            timing.max_green
        )));
    }
    if signal.in_yellow {
        return Err(ControlError::NotAtDecisionPoint);
    }

    let slot = settings.slot_s.unwrap_or_else(|| timing.base_min_green());
    let yellow = to_steps(timing.yellow, dt);
    let hold = to_steps(slot, dt) + yellow;
    let max_green = to_steps(timing.max_green, dt);
    let elapsed = to_steps(signal.elapsed_green, dt);
    let first_hold = if elapsed < max_green { hold.min(max_green - elapsed) } else { hold };
    let horizon_steps = first_hold + hold * (settings.horizon_slots as u32 - 1);

    let problem = Problem {
        green_sets: layout.phase_ids().map(|p| layout.green_mask(p)).collect(),
        arrivals: demand_per_s.iter().map(|a| a * dt).collect(),
        capacity: params.weights.iter().map(|w| w / 3600.0 * dt).collect(),
        dt,
        yellow,
        min_green: timing.min_green.iter().map(|g| to_steps(*g, dt)).collect(),
        max_green,
        hold,
        horizon_blocks: settings.horizon_slots,
        horizon_steps,
        _layout: layout,
    };
    let mut search = Search { problem: &problem, labels: HashMap::new(), best: None, path: vec![] };
    search.explore(0, 0, signal.active_phase.index(), elapsed, queue, 0.0);
    let (objective, segments) =
        search.best.ok_or_else(|| ControlError::Config("no feasible phase sequence".into()))?;
    Ok(PhasePlan { segments, objective, horizon_s: horizon_steps as f64 * dt })
}
