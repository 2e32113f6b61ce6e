//! Extraction of the single fenced JSON record a model reply must contain.

use serde::Deserialize;
use serde_json::Value;

use crate::sim::LaneId;

use super::incident::ReasoningTrace;
use super::verdict::Verdict;

/// Body of the first ```` ```json ```` (or bare ```` ``` ````) fence.
pub fn extract_fenced(text: &str) -> Result<&str, String> {
    let start = text.find("```").ok_or("no fenced ```json block found")?;
    let after = &text[start + 3..];
    let body_start = after.find('\n').ok_or("fence is not followed by a newline")?;
    let tag = after[..body_start].trim();
    if !(tag.is_empty() || tag.eq_ignore_ascii_case("json")) {
        return Err(format!("fence language must be json, got '{tag}'"));
    }
    let body = &after[body_start + 1..];
    let end = body.find("```").ok_or("fenced block is not closed")?;
    Ok(body[..end].trim())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorRecord {
    pub theta: Vec<f64>,
    pub trace: ReasoningTrace,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGenerator {
    theta: Vec<Value>,
    tau_cond: String,
    tau_ctrl: String,
    affected_lanes: Vec<Value>,
}

fn lane_index(v: &Value, lanes: usize) -> Result<LaneId, String> {
    let k = v
        .as_u64()
        .or_else(|| v.as_f64().filter(|f| f.fract() == 0.0 && *f >= 0.0).map(|f| f as u64))
        .ok_or_else(|| format!("affected_lanes entry {v} is not a lane index"))?;
    if k as usize >= lanes {
        return Err(format!("affected lane {k} is out of range 0..{}", lanes - 1));
    }
    Ok(k as usize)
}

pub fn parse_generator(text: &str, lanes: usize) -> Result<GeneratorRecord, String> {
    let body = extract_fenced(text)?;
    let raw: RawGenerator = serde_json::from_str(body).map_err(|e| format!("invalid generator record: {e}"))?;
    if raw.theta.len() != lanes {
        return Err(format!("theta has {} values, expected {lanes}", raw.theta.len()));
    }
    let theta = raw
        .theta
        .iter()
        .enumerate()
        .map(|(k, v)| v.as_f64().filter(|f| f.is_finite()).ok_or_else(|| format!("theta[{k}] = {v} is not a finite number")))
        .collect::<Result<Vec<f64>, String>>()?;
    if raw.tau_cond.trim().is_empty() || raw.tau_ctrl.trim().is_empty() {
        return Err("tau_cond and tau_ctrl must be nonempty".into());
    }
    let mut affected = raw.affected_lanes.iter().map(|v| lane_index(v, lanes)).collect::<Result<Vec<_>, _>>()?;
    affected.sort_unstable();
    affected.dedup();
    Ok(GeneratorRecord {
        theta,
        trace: ReasoningTrace { tau_cond: raw.tau_cond, tau_ctrl: raw.tau_ctrl, affected_lanes: affected },
    })
}

pub fn parse_verifier(text: &str) -> Result<Verdict, String> {
    let body = extract_fenced(text)?;
    serde_json::from_str(body).map_err(|e| format!("invalid verifier record: {e}"))
}
