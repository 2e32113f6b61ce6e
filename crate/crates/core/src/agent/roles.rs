//! Generator and verifier calls with parse-error retries.

use super::incident::{IncidentDescription, ReasoningTrace};
use super::llm::{ChatClient, ChatMessage, Transcript};
use super::parse::{parse_generator, parse_verifier};
use super::prompt::{build_verifier_prompt, PromptBundle, PromptContext};
use super::verdict::{map_check, map_mismatch_note, Verdict};
use super::AgentError;

pub const GENERATOR_TEMPERATURE: f64 = 1.0;
pub const VERIFIER_TEMPERATURE: f64 = 0.0;
pub const DEFAULT_RETRY_BUDGET: u32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    /// Proposed parameters, clamped into the box.
    pub theta: Vec<f64>,
    pub trace: ReasoningTrace,
    /// Re-prompts needed after parse failures.
    pub retries: u32,
}

/// Sends `bundle`, re-prompting with the parse error up to `retry_budget`
/// times, and parses the result with `parse`.
fn ask<T>(
    label: &str,
    bundle: &PromptBundle,
    client: &dyn ChatClient,
    temperature: f64,
    retry_budget: u32,
    transcript: &mut Transcript,
    parse: impl Fn(&str) -> Result<T, String>,
) -> Result<(T, u32), AgentError> {
    let mut messages = vec![ChatMessage::user(bundle.render())];
    let mut last_error = String::new();
    for attempt in 0..=retry_budget {
        let reply = client.chat(&messages, temperature);
        transcript.exchange(&format!("{label} attempt {}", attempt + 1), &messages, temperature, &reply);
        let reply = reply?;
        match parse(&reply) {
            Ok(value) => return Ok((value, attempt)),
            Err(e) => {
                transcript.note(format!("parse error: {e}"));
                last_error = e.clone();
                messages.push(ChatMessage::assistant(reply));
                messages.push(ChatMessage::user(format!(
                    "Your reply could not be used: {e}. Answer again with exactly one fenced ```json record in the required format."
                )));
            }
        }
    }
    Err(AgentError::Exhausted { attempts: retry_budget + 1, last_error })
}

pub fn generate(
    bundle: &PromptBundle,
    client: &dyn ChatClient,
    retry_budget: u32,
    theta_min: f64,
    theta_max: f64,
    lanes: usize,
    transcript: &mut Transcript,
) -> Result<Generation, AgentError> {
    let (record, retries) = ask("generator", bundle, client, GENERATOR_TEMPERATURE, retry_budget, transcript, |r| {
        parse_generator(r, lanes)
    })?;
    let theta = record.theta.iter().map(|w| w.clamp(theta_min, theta_max)).collect();
    Ok(Generation { theta, trace: record.trace, retries })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    /// Verdict with the lane-mapping factor recomputed locally.
    pub verdict: Verdict,
    /// What the client itself answered for the mapping factor.
    pub client_nu_map: bool,
    pub retries: u32,
}

#[allow(clippy::too_many_arguments)]
pub fn verify(
    ctx: &PromptContext<'_>,
    incident: &IncidentDescription,
    theta_prev: &[f64],
    theta_new: &[f64],
    trace: &ReasoningTrace,
    client: &dyn ChatClient,
    retry_budget: u32,
    transcript: &mut Transcript,
) -> Result<Verification, AgentError> {
    if theta_prev.len() != theta_new.len() {
        return Err(AgentError::Dimension { expected: theta_prev.len(), got: theta_new.len() });
    }
    let bundle = build_verifier_prompt(ctx, incident, theta_prev, theta_new, trace);
    let (mut verdict, retries) =
        ask("verifier", &bundle, client, VERIFIER_TEMPERATURE, retry_budget, transcript, parse_verifier)?;
    let client_nu_map = verdict.nu_map;
    verdict.nu_map = map_check(theta_prev, theta_new, &trace.affected_lanes);
    if let Some(note) = map_mismatch_note(theta_prev, theta_new, &trace.affected_lanes) {
        let sep = if verdict.feedback.trim().is_empty() { "" } else { " " };
        verdict.feedback = format!("{}{sep}{note}", verdict.feedback.trim_end());
    }
    transcript.note(format!(
        "lane mapping: client nu_map = {}, computed nu_map = {}",
        client_nu_map as u8, verdict.nu_map as u8
    ));
    Ok(Verification { verdict, client_nu_map, retries })
}

#[cfg(test)]
mod tests {
    use std::sync::Mutex;

    use super::*;
    use crate::agent::prompt::build_generator_prompt;
    use crate::agent::StubClient;
    use crate::control::ControllerKind;
    use crate::sim::{Approach, IntersectionLayout};

    /// Replays canned replies in order and records temperatures.
    struct Scripted {
        replies: Mutex<Vec<String>>,
        temps: Mutex<Vec<f64>>,
    }

    impl Scripted {
        fn new(replies: &[&str]) -> Self {
            Scripted {
                replies: Mutex::new(replies.iter().rev().map(|s| s.to_string()).collect()),
                temps: Mutex::new(vec![]),
            }
        }
    }

    impl ChatClient for Scripted {
        fn chat(&self, _: &[ChatMessage], t: f64) -> Result<String, AgentError> {
            self.temps.lock().unwrap().push(t);
            Ok(self.replies.lock().unwrap().pop().unwrap_or_default())
        }

        fn name(&self) -> String {
            "scripted".into()
        }
    }

    fn incident(kind: &str) -> IncidentDescription {
        IncidentDescription {
            time_s: 300.0,
            stamp: "07:35:00".into(),
            approach: Approach::West,
            lanes: vec![5, 6],
            kind: kind.into(),
            narrative: "Work zone.".into(),
        }
    }

    fn good_record(theta5: f64) -> String {
        let mut theta = vec![1800.0; 16];
        theta[5] = theta5;
        format!(
            "```json\n{{\"theta\":{},\"tau_cond\":\"c\",\"tau_ctrl\":\"d\",\"affected_lanes\":[5]}}\n```",
            serde_json::to_string(&theta).unwrap()
        )
    }

    #[test]
    fn malformed_once_then_valid() {
        let layout = IntersectionLayout::four_phase();
        let ctx = PromptContext { layout: &layout, controller: ControllerKind::MaxPressure, theta_min: 0.0, theta_max: 1800.0 };
        let bundle = build_generator_prompt(&ctx, &incident("road maintenance"), None, true);
        let client = Scripted::new(&["not json", &good_record(-50.0)]);
        let mut t = Transcript::new();
        let g = generate(&bundle, &client, 3, 0.0, 1800.0, 16, &mut t).unwrap();
        assert_eq!(g.retries, 1);
        assert_eq!(g.theta[5], 0.0, "clamped into the box");
        assert_eq!(*client.temps.lock().unwrap(), vec![1.0, 1.0]);
        assert!(t.as_str().contains("parse error: no fenced"));
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let layout = IntersectionLayout::four_phase();
        let ctx = PromptContext { layout: &layout, controller: ControllerKind::MaxPressure, theta_min: 0.0, theta_max: 1800.0 };
        let bundle = build_generator_prompt(&ctx, &incident("road maintenance"), None, true);
        let client = Scripted::new(&["x", "y", "z", "w", &good_record(0.0)]);
        let err = generate(&bundle, &client, 3, 0.0, 1800.0, 16, &mut Transcript::new()).unwrap_err();
        assert!(matches!(err, AgentError::Exhausted { attempts: 4, .. }));
    }

    #[test]
    fn verifier_overrides_lane_mapping() {
        let layout = IntersectionLayout::four_phase();
        let ctx = PromptContext { layout: &layout, controller: ControllerKind::MaxPressure, theta_min: 0.0, theta_max: 1800.0 };
        let prev = vec![1800.0; 16];
        let mut new = prev.clone();
        new[5] = 0.0;
        new[9] = 0.0;
        let trace = ReasoningTrace { tau_cond: "c".into(), tau_ctrl: "zero lane 5".into(), affected_lanes: vec![5] };
        let client = Scripted::new(&["```json\n{\"nu_cond\":1,\"nu_ctrl\":1,\"nu_map\":1,\"feedback\":\"fine\"}\n```"]);
        let v = verify(&ctx, &incident("road maintenance"), &prev, &new, &trace, &client, 3, &mut Transcript::new())
            .unwrap();
        assert!(v.client_nu_map);
        assert!(!v.verdict.nu_map);
        assert_eq!(v.verdict.nu(), 0);
        assert!(v.verdict.feedback.contains("lane 9"));
        assert_eq!(*client.temps.lock().unwrap(), vec![0.0]);
    }

    #[test]
    fn no_op_change_passes_mapping_regardless_of_client() {
        let layout = IntersectionLayout::four_phase();
        let ctx = PromptContext { layout: &layout, controller: ControllerKind::MaxPressure, theta_min: 0.0, theta_max: 1800.0 };
        let prev = vec![1800.0; 16];
        let trace = ReasoningTrace { tau_cond: "c".into(), tau_ctrl: "keep".into(), affected_lanes: vec![] };
        let client = Scripted::new(&["```json\n{\"nu_cond\":1,\"nu_ctrl\":1,\"nu_map\":0,\"feedback\":\"\"}\n```"]);
        let v = verify(&ctx, &incident("x"), &prev, &prev, &trace, &client, 0, &mut Transcript::new()).unwrap();
        assert!(v.verdict.nu_map);
        assert!(v.verdict.accepted());
    }

    #[test]
    fn stub_round_for_maintenance() {
        let layout = IntersectionLayout::four_phase();
        let ctx = PromptContext { layout: &layout, controller: ControllerKind::MaxPressure, theta_min: 0.0, theta_max: 1800.0 };
        let bundle = build_generator_prompt(&ctx, &incident("road maintenance"), None, true);
        let stub = StubClient::default();
        let mut t = Transcript::new();
        let g = generate(&bundle, &stub, 3, 0.0, 1800.0, 16, &mut t).unwrap();
        assert_eq!(g.retries, 0);
        let v = verify(&ctx, &incident("road maintenance"), &[1800.0; 16], &g.theta, &g.trace, &stub, 3, &mut t).unwrap();
        assert!(v.verdict.accepted(), "{:?}", v.verdict);
    }
}
