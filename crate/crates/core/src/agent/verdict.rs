use std::collections::BTreeSet;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::sim::LaneId;

/// Verifier judgment on one generated proposal. The overall judgment is the
/// product of the three binary factors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    #[serde(with = "binary")]
    pub nu_cond: bool,
    #[serde(with = "binary")]
    pub nu_ctrl: bool,
    #[serde(with = "binary")]
    pub nu_map: bool,
    pub feedback: String,
}

impl Verdict {
    pub fn new(nu_cond: bool, nu_ctrl: bool, nu_map: bool, feedback: impl Into<String>) -> Self {
        Verdict { nu_cond, nu_ctrl, nu_map, feedback: feedback.into() }
    }

    pub fn nu(&self) -> u8 {
        self.nu_cond as u8 * self.nu_ctrl as u8 * self.nu_map as u8
    }

    pub fn accepted(&self) -> bool {
        self.nu() == 1
    }
}

/// Serialises a flag as `0`/`1` and accepts either integers or booleans.
pub(crate) mod binary {
    use super::*;

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(*v as u8)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::Bool(b) => Ok(b),
            serde_json::Value::Number(n) if n.as_f64() == Some(0.0) => Ok(false),
            serde_json::Value::Number(n) if n.as_f64() == Some(1.0) => Ok(true),
            other => Err(serde::de::Error::custom(format!("expected 0 or 1, got {other}"))),
        }
    }
}

/// Lanes whose parameter changed between `prev` and `new`.
pub fn modified_lanes(prev: &[f64], new: &[f64]) -> BTreeSet<LaneId> {
    prev.iter().zip(new).enumerate().filter(|(_, (a, b))| a != b).map(|(k, _)| k).collect()
}

/// True iff the set of modified lanes equals the declared affected set.
pub fn map_check(prev: &[f64], new: &[f64], affected: &[LaneId]) -> bool {
    debug_assert_eq!(prev.len(), new.len());
    modified_lanes(prev, new) == affected.iter().copied().collect()
}

/// Human-readable reason for a failed map check, naming the offending lanes.
pub fn map_mismatch_note(prev: &[f64], new: &[f64], affected: &[LaneId]) -> Option<String> {
    let modified = modified_lanes(prev, new);
    let declared: BTreeSet<LaneId> = affected.iter().copied().collect();
    if modified == declared {
        return None;
    }
    let fmt = |s: BTreeSet<LaneId>| s.iter().map(|k| format!("lane {k}")).collect::<Vec<_>>().join(", ");
    let extra: BTreeSet<_> = modified.difference(&declared).copied().collect();
    let missing: BTreeSet<_> = declared.difference(&modified).copied().collect();
    let mut parts = Vec::new();
    if !extra.is_empty() {
        parts.push(format!("modified but not declared affected: {}", fmt(extra)));
    }
    if !missing.is_empty() {
        parts.push(format!("declared affected but left unchanged: {}", fmt(missing)));
    }
    Some(format!("Lane mapping check failed ({}).", parts.join("; ")))
}
