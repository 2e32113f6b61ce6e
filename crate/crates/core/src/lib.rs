//! Incident-aware tuning of adaptive traffic signal controllers.
//!
//! An upper-level agent reads a textual incident description, consults a
//! retrieval database of chained incident → condition → control references,
//! and proposes a new per-lane parameter vector for a lower-level controller
//! (max-pressure or store-and-forward MPC). A verifier judges each proposal
//! and the verdict is written back to the database so later encounters of the
//! same incident can learn from it.
//!
//! The crate is organised bottom-up:
//!
//! - [`sim`]: deterministic point-queue plant for one isolated intersection.
//! - [`control`]: the two parameterised controllers.
//! - [`tlrs`]: embedding, storage, and two-step retrieval of references.
//! - [`agent`]: prompt construction, LLM backends, generator and verifier.
//! - [`scenario`] and [`runner`]: configuration and the closed-loop driver.

pub mod agent;
pub mod control;
pub mod runner;
pub mod scenario;
pub mod sim;
pub mod tlrs;
mod transport;

pub use agent::{IncidentDescription, ReasoningTrace, Verdict};
pub use control::{ControllerKind, ControllerParams, PhasePlan};
pub use runner::{run_matrix, run_scenario, MatrixRow, MetricsReport, RunOptions};
pub use scenario::{DemandLevel, IncidentKind, ScenarioConfig, Variant};
pub use sim::{
    DemandProfile, IncidentEffect, IntersectionLayout, LaneId, PhaseId, SignalState,
    TrafficState,
};
pub use tlrs::{QaEntry, TrafficLanguageDb};
pub use transport::{ServiceConfig, TransportError};
