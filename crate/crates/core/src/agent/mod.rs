//! The incident-handling agent: prompt construction, LLM backends, and the
//! generator/verifier pair.

mod incident;
mod llm;
mod parse;
mod prompt;
mod roles;
mod stub;
mod verdict;

use thiserror::Error;

use crate::transport::TransportError;

pub use incident::{clock_stamp, IncidentDescription, ReasoningTrace};
pub use llm::{ChatClient, ChatMessage, HttpChatClient, Role, Transcript};
pub use parse::{extract_fenced, parse_generator, parse_verifier, GeneratorRecord};
pub use prompt::{build_generator_prompt, build_verifier_prompt, BlockKind, PromptBundle, PromptContext};
pub use roles::{
    generate, verify, Generation, Verification, DEFAULT_RETRY_BUDGET, GENERATOR_TEMPERATURE, VERIFIER_TEMPERATURE,
};
pub use stub::{Condition, Rule, RuleTable, StubClient};
pub use verdict::{map_check, map_mismatch_note, modified_lanes, Verdict};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("stub rules: {0}")]
    Rules(String),
    #[error("no usable reply after {attempts} attempt(s); last error: {last_error}")]
    Exhausted { attempts: u32, last_error: String },
    #[error("parameter vectors differ in length: {expected} vs {got}")]
    Dimension { expected: usize, got: usize },
}
