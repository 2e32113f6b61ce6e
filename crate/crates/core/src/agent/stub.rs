//! Deterministic rule-table backend. The reply is a pure function of the
//! first user message: the first rule whose conditions all hold wins.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::llm::{ChatClient, ChatMessage, Role};
use super::prompt::BlockKind;
use super::AgentError;

const GENERATOR_RULES: &str = include_str!("../../rules/generator.json");
const VERIFIER_RULES: &str = include_str!("../../rules/verifier.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    /// `prompt` for the whole message, otherwise a block name such as
    /// `incident` or `retrieved`.
    #[serde(rename = "in")]
    pub scope: String,
    /// Substrings that must all occur (case-insensitive).
    #[serde(default)]
    pub all: Vec<String>,
    /// Substrings none of which may occur.
    #[serde(default)]
    pub none: Vec<String>,
    /// Require the block to be present (`true`) or absent (`false`).
    #[serde(default)]
    pub present: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub name: String,
    #[serde(default)]
    pub when: Vec<Condition>,
    /// Structured record returned inside a json fence.
    #[serde(default)]
    pub record: Option<Value>,
    /// Raw reply text, used verbatim.
    #[serde(default)]
    pub reply: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleTable {
    pub rules: Vec<Rule>,
}

impl RuleTable {
    pub fn from_json(text: &str) -> Result<Self, AgentError> {
        let table: RuleTable = serde_json::from_str(text).map_err(|e| AgentError::Rules(e.to_string()))?;
        for r in &table.rules {
            if r.record.is_some() == r.reply.is_some() {
                return Err(AgentError::Rules(format!("rule {} needs exactly one of record or reply", r.name)));
            }
            for c in &r.when {
                if c.scope != "prompt" && block_kind(&c.scope).is_none() {
                    return Err(AgentError::Rules(format!("rule {}: unknown scope '{}'", r.name, c.scope)));
                }
            }
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let text = std::fs::read_to_string(path).map_err(|e| AgentError::Rules(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn default_generator() -> Self {
        Self::from_json(GENERATOR_RULES).expect("bundled generator rules are valid")
    }

    pub fn default_verifier() -> Self {
        Self::from_json(VERIFIER_RULES).expect("bundled verifier rules are valid")
    }

    fn first_match(&self, prompt: &str) -> Option<&Rule> {
        let sections = split_sections(prompt);
        self.rules.iter().find(|r| r.when.iter().all(|c| holds(c, prompt, &sections)))
    }
}

fn block_kind(name: &str) -> Option<BlockKind> {
    Some(match name {
        "overview" => BlockKind::Overview,
        "incident" => BlockKind::Incident,
        "retrieved" => BlockKind::Retrieved,
        "instruction" => BlockKind::Instruction,
        "candidate" => BlockKind::Candidate,
        _ => return None,
    })
}

/// `## Title` sections of a rendered prompt, keyed by title.
fn split_sections(prompt: &str) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = Vec::new();
    for line in prompt.lines() {
        if let Some(title) = line.strip_prefix("## ") {
            out.push((title.trim().to_string(), String::new()));
        } else if let Some((_, body)) = out.last_mut() {
            body.push_str(line);
            body.push('\n');
        }
    }
    out
}

fn holds(c: &Condition, prompt: &str, sections: &[(String, String)]) -> bool {
    let text = if c.scope == "prompt" {
        Some(prompt)
    } else {
        let title = block_kind(&c.scope).map(BlockKind::title);
        sections.iter().find(|(t, _)| Some(t.as_str()) == title).map(|(_, b)| b.as_str())
    };
    if let Some(want) = c.present {
        if want != text.is_some() {
            return false;
        }
    }
    if c.all.is_empty() && c.none.is_empty() {
        return true;
    }
    let Some(text) = text else { return c.all.is_empty() };
    let lower = text.to_lowercase();
    c.all.iter().all(|s| lower.contains(&s.to_lowercase())) && !c.none.iter().any(|s| lower.contains(&s.to_lowercase()))
}

/// Routes verifier prompts (those with a candidate block) to the verifier
/// table and everything else to the generator table.
#[derive(Debug, Clone)]
pub struct StubClient {
    pub generator: RuleTable,
    pub verifier: RuleTable,
}

impl Default for StubClient {
    fn default() -> Self {
        StubClient { generator: RuleTable::default_generator(), verifier: RuleTable::default_verifier() }
    }
}

impl StubClient {
    pub fn new(generator: RuleTable, verifier: RuleTable) -> Self {
        StubClient { generator, verifier }
    }
}

impl ChatClient for StubClient {
    fn chat(&self, messages: &[ChatMessage], _temperature: f64) -> Result<String, AgentError> {
        let prompt = messages
            .iter()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .ok_or_else(|| AgentError::Rules("no user message".into()))?;
        let candidate_header = format!("## {}", BlockKind::Candidate.title());
        let table = if prompt.lines().any(|l| l.trim_end() == candidate_header) { &self.verifier } else { &self.generator };
        let rule = table
            .first_match(prompt)
            .ok_or_else(|| AgentError::Rules("no stub rule matches the prompt".into()))?;
        Ok(match (&rule.record, &rule.reply) {
            (Some(record), _) => format!("Rule {} applies.\n```json\n{}\n```", rule.name, record),
            (None, Some(reply)) => reply.clone(),
            (None, None) => unreachable!("validated when the table was loaded"),
        })
    }

    fn name(&self) -> String {
        "stub".into()
    }
}
