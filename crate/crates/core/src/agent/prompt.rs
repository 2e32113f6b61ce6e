use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::control::ControllerKind;
use crate::sim::{IntersectionLayout, WalkDirection};
use crate::tlrs::{RetrievedSet, Stage};

use super::incident::{IncidentDescription, ReasoningTrace};

const GENERATOR_OVERVIEW: &str = include_str!("../../templates/generator_overview.txt");
const GENERATOR_INSTRUCTION: &str = include_str!("../../templates/generator_instruction.txt");
const VERIFIER_OVERVIEW: &str = include_str!("../../templates/verifier_overview.txt");
const VERIFIER_INSTRUCTION: &str = include_str!("../../templates/verifier_instruction.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Overview,
    Incident,
    Retrieved,
    Instruction,
    Candidate,
}

impl BlockKind {
    pub fn title(self) -> &'static str {
        match self {
            BlockKind::Overview => "Overview",
            BlockKind::Incident => "Incident",
            BlockKind::Retrieved => "Retrieved references",
            BlockKind::Instruction => "Instruction",
            BlockKind::Candidate => "Candidate",
        }
    }
}

/// Ordered prompt blocks; rendered as `## Title` sections.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    pub blocks: Vec<(BlockKind, String)>,
}

impl PromptBundle {
    pub fn kinds(&self) -> Vec<BlockKind> {
        self.blocks.iter().map(|(k, _)| *k).collect()
    }

    pub fn block(&self, kind: BlockKind) -> Option<&str> {
        self.blocks.iter().find(|(k, _)| *k == kind).map(|(_, t)| t.as_str())
    }

    pub fn render(&self) -> String {
        self.blocks
            .iter()
            .map(|(k, text)| format!("## {}\n{}\n", k.title(), text.trim_end()))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// What the prompts need to know about the intersection and controller.
#[derive(Debug, Clone)]
pub struct PromptContext<'a> {
    pub layout: &'a IntersectionLayout,
    pub controller: ControllerKind,
    pub theta_min: f64,
    pub theta_max: f64,
}

impl PromptContext<'_> {
    fn fill(&self, template: &str) -> String {
        let lanes = self
            .layout
            .lanes()
            .iter()
            .map(|l| format!("{}: {}, {}", l.id, l.approach.name(), l.movement.name()))
            .collect::<Vec<_>>()
            .join("\n");
        let phases = self
            .layout
            .phases
            .iter()
            .map(|p| {
                let lanes = p.lanes.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(", ");
                let mut line = format!("{} ({}): lanes {lanes}", p.id, p.name);
                if !p.pedestrians.is_empty() {
                    let walks = p.pedestrians.iter().map(|w| walk_name(*w)).collect::<Vec<_>>().join(", ");
                    let _ = write!(line, "; pedestrians cross {walks}");
                }
                line
            })
            .collect::<Vec<_>>()
            .join("\n");
        template
            .replace("{lanes}", &lanes)
            .replace("{phases}", &phases)
            .replace("{controller}", &controller_text(&self.controller))
            .replace("{lane_count}", &self.layout.lane_count().to_string())
            .replace("{theta_min}", &fmt_num(self.theta_min))
            .replace("{theta_max}", &fmt_num(self.theta_max))
    }
}

fn walk_name(w: WalkDirection) -> &'static str {
    match w {
        WalkDirection::EastWest => "east to west",
        WalkDirection::WestEast => "west to east",
        WalkDirection::NorthSouth => "north to south",
        WalkDirection::SouthNorth => "south to north",
    }
}

fn controller_text(kind: &ControllerKind) -> String {
    match kind {
        ControllerKind::MaxPressure => "max-pressure. At every decision point it gives green to the phase with the \
            largest sum of theta[k] times queue[k] over the phase's lanes."
            .into(),
        ControllerKind::Mpc(s) => format!(
            "model predictive control. At every decision point it searches phase sequences {} blocks ahead with a \
             store-and-forward queue model in which lane k discharges at most theta[k] veh/h during green, and \
             applies the first block of the sequence with the least total queue.",
            s.horizon_slots
        ),
    }
}

pub(crate) fn fmt_num(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

fn render_retrieved(set: &RetrievedSet<'_>) -> String {
    let mut out = String::new();
    for (i, hit) in set.hits.iter().enumerate() {
        let stage = match hit.stage {
            Stage::Inc => "incident",
            Stage::Cond => "condition",
        };
        let e = hit.entry;
        let judgment = match &e.verdict {
            None => "unverified".to_string(),
            Some(v) => format!(
                "{} (nu_cond={}, nu_ctrl={}, nu_map={}). Feedback: {}",
                if v.accepted() { "accepted" } else { "rejected" },
                v.nu_cond as u8,
                v.nu_ctrl as u8,
                v.nu_map as u8,
                v.feedback.trim()
            ),
        };
        let _ = writeln!(
            out,
            "### Reference {} ({stage} match, similarity {:.3})\nIncident: {}\nCondition: {}\nControl: {}\nVerifier judgment: {judgment}",
            i + 1,
            hit.score,
            e.l_inc.trim(),
            e.l_cond.trim(),
            e.l_ctrl.trim()
        );
        if i + 1 < set.hits.len() {
            out.push('\n');
        }
    }
    out
}

/// Generator prompt. `retrieved = None` leaves the references block out, as
/// does an empty set; `with_instruction = false` drops the step guidance.
pub fn build_generator_prompt(
    ctx: &PromptContext<'_>,
    incident: &IncidentDescription,
    retrieved: Option<&RetrievedSet<'_>>,
    with_instruction: bool,
) -> PromptBundle {
    let mut blocks = vec![
        (BlockKind::Overview, ctx.fill(GENERATOR_OVERVIEW)),
        (BlockKind::Incident, incident.render()),
    ];
    if let Some(set) = retrieved.filter(|s| !s.is_empty()) {
        blocks.push((BlockKind::Retrieved, render_retrieved(set)));
    }
    if with_instruction {
        blocks.push((BlockKind::Instruction, ctx.fill(GENERATOR_INSTRUCTION)));
    }
    PromptBundle { blocks }
}

pub fn build_verifier_prompt(
    ctx: &PromptContext<'_>,
    incident: &IncidentDescription,
    theta_prev: &[f64],
    theta_new: &[f64],
    trace: &ReasoningTrace,
) -> PromptBundle {
    let mut cand = String::new();
    let list = theta_new.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(", ");
    let _ = writeln!(cand, "theta = [{list}]");
    let changes: Vec<String> = theta_prev
        .iter()
        .zip(theta_new)
        .enumerate()
        .filter(|(_, (a, b))| a != b)
        .map(|(k, (a, b))| format!("lane {k}: {} -> {}", fmt_num(*a), fmt_num(*b)))
        .collect();
    if changes.is_empty() {
        let _ = writeln!(cand, "Changed lanes: none");
    } else {
        let _ = writeln!(cand, "Changed lanes: {}", changes.join("; "));
    }
    let affected = trace.affected_lanes.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(", ");
    let _ = writeln!(cand, "affected_lanes = [{affected}]");
    let _ = writeln!(cand, "tau_cond: {}", trace.tau_cond.trim());
    let _ = write!(cand, "tau_ctrl: {}", trace.tau_ctrl.trim());
    PromptBundle {
        blocks: vec![
            (BlockKind::Overview, ctx.fill(VERIFIER_OVERVIEW)),
            (BlockKind::Incident, incident.render()),
            (BlockKind::Candidate, cand),
            (BlockKind::Instruction, ctx.fill(VERIFIER_INSTRUCTION)),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::Verdict;
    use crate::sim::Approach;
    use crate::tlrs::{HashEmbedder, QaEntry, TrafficLanguageDb};

    fn incident() -> IncidentDescription {
        IncidentDescription {
            time_s: 300.0,
            stamp: "07:35:00".into(),
            approach: Approach::West,
            lanes: vec![5, 6],
            kind: "road maintenance".into(),
            narrative: "Lane 5 is closed.".into(),
        }
    }

    fn ctx(layout: &IntersectionLayout) -> PromptContext<'_> {
        PromptContext { layout, controller: ControllerKind::MaxPressure, theta_min: 0.0, theta_max: 1800.0 }
    }

    #[test]
    fn block_order_and_omission() {
        let layout = IntersectionLayout::four_phase();
        let c = ctx(&layout);
        let empty = RetrievedSet::default();
        let full = build_generator_prompt(&c, &incident(), Some(&empty), true);
        assert_eq!(full.kinds(), vec![BlockKind::Overview, BlockKind::Incident, BlockKind::Instruction]);
        let bare = build_generator_prompt(&c, &incident(), None, false);
        assert_eq!(bare.kinds(), vec![BlockKind::Overview, BlockKind::Incident]);

        let e = HashEmbedder::default();
        let mut db = TrafficLanguageDb::new();
        let v = Verdict::new(true, false, true, "too conservative");
        db.insert(QaEntry::build("x", "lane closed", "zero capacity", "set to 900", Some(v), 0, &e).unwrap())
            .unwrap();
        let r = crate::tlrs::two_step_retrieve("lane closed", 2, &db, &e).unwrap();
        let with = build_generator_prompt(&c, &incident(), Some(&r), true);
        assert_eq!(
            with.kinds(),
            vec![BlockKind::Overview, BlockKind::Incident, BlockKind::Retrieved, BlockKind::Instruction]
        );
        let text = with.render();
        assert!(text.contains("rejected (nu_cond=1, nu_ctrl=0, nu_map=1). Feedback: too conservative"));
        let pos: Vec<usize> = ["## Overview", "## Incident", "## Retrieved references", "## Instruction"]
            .iter()
            .map(|h| text.find(h).unwrap())
            .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn templates_are_fully_filled_and_deterministic() {
        let layout = IntersectionLayout::four_phase();
        let c = ctx(&layout);
        let a = build_generator_prompt(&c, &incident(), None, true).render();
        let b = build_generator_prompt(&c, &incident(), None, true).render();
        assert_eq!(a, b);
        for key in ["{lanes}", "{phases}", "{controller}", "{lane_count}", "{theta_min}", "{theta_max}"] {
            assert!(!a.contains(key), "{key} left in prompt");
        }
        assert!(a.contains("5: west, through"));
        assert!(a.contains("3 (NS through): lanes 9, 10, 11, 13, 14, 15; pedestrians cross north to south"));
    }

    #[test]
    fn verifier_prompt_lists_changes() {
        let layout = IntersectionLayout::four_phase();
        let prev = vec![1800.0; 16];
        let mut new = prev.clone();
        new[5] = 0.0;
        let trace = ReasoningTrace { tau_cond: "closed".into(), tau_ctrl: "zero it".into(), affected_lanes: vec![5] };
        let p = build_verifier_prompt(&ctx(&layout), &incident(), &prev, &new, &trace);
        assert_eq!(
            p.kinds(),
            vec![BlockKind::Overview, BlockKind::Incident, BlockKind::Candidate, BlockKind::Instruction]
        );
        let cand = p.block(BlockKind::Candidate).unwrap();
        assert!(cand.contains("Changed lanes: lane 5: 1800 -> 0"));
        assert!(cand.contains("affected_lanes = [5]"));
    }
}
