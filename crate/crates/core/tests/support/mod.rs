//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use incident_tsc::control::{mpc_plan, tie_tolerance, MpcSettings};
use incident_tsc::sim::{IntersectionLayout, PhaseId, SignalState, SignalTiming};
use incident_tsc::tlrs::{QaEntry, Stage, TrafficLanguageDb};
use incident_tsc::ControllerParams;
use rand::Rng;

// ---------------------------------------------------------------- retrieval

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Full sort of every entry by (score desc, creation step asc, insertion asc).
pub fn brute_rank(query: &[f64], stage: Stage, k: usize, db: &TrafficLanguageDb) -> Vec<(String, f64)> {
    let mut all: Vec<(usize, f64, u64)> = db
        .entries()
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let v = match stage {
                Stage::Inc => &e.emb_inc,
                Stage::Cond => &e.emb_cond,
            };
            (i, dot(query, v), e.created_at_step)
        })
        .collect();
    all.sort_by(|a, b| {
        b.1.partial_cmp(&a.1).unwrap().then_with(|| a.2.cmp(&b.2)).then_with(|| a.0.cmp(&b.0))
    });
    all.into_iter().take(k).map(|(i, s, _)| (db.entries()[i].id.clone(), s)).collect()
}

pub fn brute_two_step(query: &[f64], k: usize, db: &TrafficLanguageDb) -> Vec<(String, f64)> {
    let first = brute_rank(query, Stage::Inc, k, db);
    let mut out: Vec<(String, f64)> = Vec::new();
    for hit in &first {
        if !out.iter().any(|(id, _)| id == &hit.0) {
            out.push(hit.clone());
        }
    }
    for (id, _) in &first {
        let anchor = db.get(id).unwrap();
        for hit in brute_rank(&anchor.emb_cond, Stage::Cond, k, db) {
            if !out.iter().any(|(x, _)| x == &hit.0) {
                out.push(hit);
            }
        }
    }
    out
}

pub fn random_unit(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = dot(&v, &v).sqrt();
        if n > 1e-3 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

/// Database of `size` entries with random unit embeddings. About a fifth of
/// the entries copy an earlier embedding so that score ties actually occur.
pub fn random_db(rng: &mut impl Rng, size: usize, dim: usize) -> TrafficLanguageDb {
    let mut db = TrafficLanguageDb::new();
    for i in 0..size {
        let (emb_inc, emb_cond) = if i > 0 && rng.random_bool(0.2) {
            let j = rng.random_range(0..i);
            let e = &db.entries()[j];
            (e.emb_inc.clone(), e.emb_cond.clone())
        } else {
            (random_unit(rng, dim), random_unit(rng, dim))
        };
        let step = rng.random_range(0..20u64) * 60;
        let entry = QaEntry {
            id: format!("r{i:04}"),
            l_inc: format!("incident {i}"),
            l_cond: format!("condition {i}"),
            l_ctrl: format!("control {i}"),
            verdict: None,
            emb_inc,
            emb_cond,
            created_at_step: step,
        };
        db.insert(entry).unwrap();
    }
    db
}

// ---------------------------------------------------------------------- MPC

pub struct MpcInstance {
    pub queue: Vec<f64>,
    pub weights: Vec<f64>,
    pub demand: Vec<f64>,
    pub timing: SignalTiming,
    pub active: PhaseId,
    pub elapsed: f64,
    pub horizon: usize,
    pub slot: f64,
}

pub fn random_mpc_instance(rng: &mut impl Rng, layout: &IntersectionLayout) -> MpcInstance {
    let n = layout.lane_count();
    let phases = layout.phases.len();
    let max_green = rng.random_range(20..=45) as f64;
    let min_green: Vec<f64> = (0..phases).map(|_| rng.random_range(4..=15) as f64).collect();
    let yellow = rng.random_range(0..=4) as f64;
    let active = PhaseId(rng.random_range(1..=phases));
    MpcInstance {
        queue: (0..n).map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..40.0) }).collect(),
        weights: (0..n)
            .map(|_| if rng.random_bool(0.15) { 0.0 } else { rng.random_range(300.0..1800.0) })
            .collect(),
        demand: (0..n).map(|_| rng.random_range(0.0..0.4)).collect(),
        timing: SignalTiming { min_green, max_green, yellow },
        active,
        elapsed: rng.random_range(0..=max_green as u32) as f64,
        horizon: rng.random_range(1..=4),
        slot: rng.random_range(4..=15) as f64,
    }
}

impl MpcInstance {
    pub fn signal(&self) -> SignalState {
        let mut s = SignalState::new(self.active, self.timing.clone());
        s.elapsed_green = self.elapsed;
        s
    }

    pub fn solve(&self, layout: &IntersectionLayout) -> Option<f64> {
        let params = ControllerParams::nominal(self.weights.len(), 0.0, 1800.0).with_weights(self.weights.clone());
        let settings = MpcSettings { horizon_slots: self.horizon, slot_s: Some(self.slot) };
        mpc_plan(&self.queue, &params, &self.demand, layout, &self.signal(), &settings, 1.0).ok().map(|p| p.objective)
    }
}

/// Result of exhaustive enumeration: the minimum over all feasible phase
/// sequences and the value reported under the near-tie rule (first sequence in
/// enumeration order unless a later one is clearly cheaper).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Enumerated {
    pub minimum: f64,
    pub selected: f64,
    pub sequences: usize,
}

/// Enumerates every sequence of up to `H` phase choices (4^H at most) with a
/// one-second model, simulating each from scratch.
pub fn enumerate_mpc(inst: &MpcInstance, layout: &IntersectionLayout) -> Option<Enumerated> {
    let phases = layout.phases.len();
    let lanes = layout.lane_count();
    let masks: Vec<Vec<bool>> = (1..=phases).map(|p| layout.green_mask(PhaseId(p))).collect();
    let cap: Vec<f64> = inst.weights.iter().map(|w| w / 3600.0).collect();
    let yellow = inst.timing.yellow.round() as u32;
    let hold = inst.slot.round() as u32 + yellow;
    let max = inst.timing.max_green.round() as u32;
    let min: Vec<u32> = inst.timing.min_green.iter().map(|g| g.round() as u32).collect();
    let elapsed0 = inst.elapsed.round() as u32;
    let first_hold = if elapsed0 < max { hold.min(max - elapsed0) } else { hold };
    let horizon = first_hold + hold * (inst.horizon as u32 - 1);

    // Every choice vector in enumeration order: at each block the phase held
    // so far comes first, then the others by id.
    let mut result: Option<Enumerated> = None;
    let total = phases.pow(inst.horizon as u32);
    let mut seen_prefixes: Vec<Vec<usize>> = Vec::new();
    for code in 0..total {
        let mut digits = Vec::with_capacity(inst.horizon);
        let mut c = code;
        for _ in 0..inst.horizon {
            digits.push(c % phases);
            c /= phases;
        }
        digits.reverse();

        let mut q = inst.queue.clone();
        let mut cost = 0.0;
        let mut t = 0u32;
        let mut phase = inst.active.index();
        let mut elapsed = elapsed0;
        let mut feasible = true;
        let mut used = 0;
        let tick = |q: &mut Vec<f64>, cost: &mut f64, t: &mut u32, green: Option<usize>| {
            if *t >= horizon {
                return;
            }
            let mut total = 0.0;
            for x in q.iter() {
                total += *x;
            }
            *cost += total * 1.0;
            for k in 0..lanes {
                let avail = q[k] + inst.demand[k];
                let out = match green {
                    Some(p) if masks[p][k] => avail.min(cap[k]),
                    _ => 0.0,
                };
                q[k] = avail - out;
            }
            *t += 1;
        };
        for (block, &d) in digits.iter().enumerate() {
            if t >= horizon {
                break;
            }
            used = block + 1;
            // Map the digit to the enumeration order at this block.
            let others: Vec<usize> = (0..phases).filter(|&p| p != phase).collect();
            let next = if d == 0 { phase } else { others[d - 1] };
            if next == phase {
                let len = if block == 0 { hold.min(max.saturating_sub(elapsed)) } else { hold };
                if len == 0 || elapsed + len > max {
                    feasible = false;
                    break;
                }
                for _ in 0..len {
                    tick(&mut q, &mut cost, &mut t, Some(phase));
                }
                elapsed += len;
            } else {
                if elapsed < min[phase] {
                    feasible = false;
                    break;
                }
                for _ in 0..yellow {
                    tick(&mut q, &mut cost, &mut t, None);
                }
                for _ in 0..min[next] {
                    tick(&mut q, &mut cost, &mut t, Some(next));
                }
                phase = next;
                elapsed = min[next];
            }
        }
        if !feasible {
            continue;
        }
        // Sequences that hit the horizon early share their prefix; count it once.
        let prefix = digits[..used].to_vec();
        if used < inst.horizon {
            if seen_prefixes.contains(&prefix) {
                continue;
            }
            seen_prefixes.push(prefix);
        }
        result = Some(match result {
            None => Enumerated { minimum: cost, selected: cost, sequences: 1 },
            Some(r) => Enumerated {
                minimum: r.minimum.min(cost),
                selected: if cost < r.selected - tie_tolerance(r.selected) { cost } else { r.selected },
                sequences: r.sequences + 1,
            },
        });
    }
    result
}

// ------------------------------------------------------------------ verdicts

/// Set-equality reference for the lane mapping check.
pub fn map_oracle(prev: &[f64], new: &[f64], affected: &[usize]) -> bool {
    let mut changed: Vec<usize> = (0..prev.len()).filter(|&k| prev[k] != new[k]).collect();
    let mut declared = affected.to_vec();
    changed.sort_unstable();
    declared.sort_unstable();
    declared.dedup();
    changed == declared
}
