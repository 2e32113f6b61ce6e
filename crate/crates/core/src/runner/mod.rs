//! Closed-loop driver: agent interventions every `q` steps while the incident
//! is active, a controller decision every step, then the plant.

mod matrix;
mod seed;
mod trajectory;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{
    build_generator_prompt, clock_stamp, generate, verify, ChatClient, IncidentDescription, PromptContext, StubClient,
    Transcript, Verdict,
};
use crate::control::{ControlError, Controller};
use crate::scenario::{ConfigError, ResolvedIncident, ScenarioConfig};
use crate::sim::{
    advance_ambulance, advance_pedestrians, compute_metrics, finalize_pedestrians, generate_arrivals,
    generate_pedestrian_arrivals, step, AmbulanceRecord, PedestrianRecord, PhaseId, PlantConfig, SignalEvent,
    SignalState, SimError, TrafficState,
};
use crate::tlrs::{seeded_database, two_step_retrieve, Embedder, HashEmbedder, QaEntry, TlrsError, TrafficLanguageDb};

pub use matrix::{matrix_configs, run_matrix, write_matrix_csv, MatrixRow};
pub use seed::references_from_reports;
pub use trajectory::{check_signal_legality, read_signal_intervals, SignalInterval, StepSnapshot, Trajectory};

pub const METRICS_FILE: &str = "metrics.json";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const TRANSCRIPT_FILE: &str = "transcript.txt";
pub const DB_FILE: &str = "tlrs_db.jsonl";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Tlrs(#[from] TlrsError),
    #[error("output: {0}")]
    Io(String),
}

/// Backends and output location shared by runs.
#[derive(Clone)]
pub struct RunOptions {
    pub client: Arc<dyn ChatClient>,
    pub embedder: Arc<dyn Embedder>,
    /// Artifacts are written here when set.
    pub out_dir: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { client: Arc::new(StubClient::default()), embedder: Arc::new(HashEmbedder::default()), out_dir: None }
    }
}

impl RunOptions {
    pub fn with_out_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.out_dir = Some(dir.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub name: String,
    pub scenario: String,
    pub controller: String,
    pub demand: String,
    pub variant: String,
    pub seed: u64,
    pub horizon_s: f64,
    pub ad_s: f64,
    pub aql_m: f64,
    pub ccr_pct: Option<f64>,
    pub ambulance_ad_s: Option<f64>,
    pub interventions: u64,
    pub generation_failures: u64,
    pub verifier_failures: u64,
    pub db_entries_added: u64,
    pub db_verified_added: u64,
    pub arrived_veh: f64,
    pub departed_veh: f64,
    pub residual_queue_veh: f64,
    pub conservation_residual: f64,
    /// Relative to the output directory.
    pub trajectory_path: Option<String>,
    pub transcript_path: Option<String>,
}

/// What happened at one agent invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Intervention {
    pub step: u64,
    pub retrieved: Vec<String>,
    /// Installed parameters; `None` when generation failed.
    pub theta: Option<Vec<f64>>,
    pub verdict: Option<Verdict>,
    pub entry_id: Option<String>,
}

pub struct RunOutcome {
    pub report: MetricsReport,
    pub trajectory: Trajectory,
    pub transcript: Transcript,
    pub interventions: Vec<Intervention>,
    pub db: TrafficLanguageDb,
    pub state: TrafficState,
}

/// Database a run starts from: the configured seed file, or the bundled
/// expert references. Only `llm_tlrs` reads it.
pub fn initial_database(cfg: &ScenarioConfig, embedder: &dyn Embedder) -> Result<TrafficLanguageDb, RunError> {
    if !cfg.variant.uses_tlrs() {
        return Ok(TrafficLanguageDb::new());
    }
    Ok(match &cfg.seed_db {
        Some(path) => TrafficLanguageDb::load(path)?,
        None => seeded_database(embedder)?,
    })
}

/// Runs one scenario on a private copy of its seed database.
pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    let db = initial_database(cfg, opts.embedder.as_ref())?;
    run_with_db(cfg, opts, db)
}

fn describe(inc: &ResolvedIncident, cfg: &ScenarioConfig, t: f64) -> IncidentDescription {
    IncidentDescription {
        time_s: t,
        stamp: clock_stamp(cfg.clock_start_s, t),
        approach: inc.approach,
        lanes: inc.lanes.clone(),
        kind: inc.type_label.clone(),
        narrative: inc.narrative.clone(),
    }
}

struct AgentCounters {
    generation_failures: u64,
    verifier_failures: u64,
    added: u64,
    verified: u64,
}

#[allow(clippy::too_many_arguments)]
fn intervene(
    cfg: &ScenarioConfig,
    opts: &RunOptions,
    ctx: &PromptContext<'_>,
    incident: &IncidentDescription,
    s: u64,
    nominal: &[f64],
    controller: &mut Controller,
    db: &mut TrafficLanguageDb,
    transcript: &mut Transcript,
    counters: &mut AgentCounters,
) -> Result<Intervention, RunError> {
    let client = opts.client.as_ref();
    let embedder = opts.embedder.as_ref();
    let lanes = cfg.layout.lane_count();
    let query = incident.render();
    transcript.note(format!("##### step {s} (t = {} s): agent invocation, variant {}", incident.time_s, cfg.variant.label()));

    let (bundle, retrieved) = if cfg.variant.uses_tlrs() {
        match two_step_retrieve(&query, cfg.k, db, embedder) {
            Ok(set) => {
                let ids: Vec<String> = set.ids().into_iter().map(String::from).collect();
                transcript.note(format!("retrieved: [{}]", ids.join(", ")));
                (build_generator_prompt(ctx, incident, Some(&set), true), ids)
            }
            Err(e) => {
                log::warn!("retrieval failed at step {s}: {e}");
                transcript.note(format!("retrieval failed: {e}"));
                (build_generator_prompt(ctx, incident, None, true), vec![])
            }
        }
    } else {
        (build_generator_prompt(ctx, incident, None, cfg.variant.uses_instruction()), vec![])
    };

    let generation = match generate(&bundle, client, cfg.retry_budget, cfg.theta_min, cfg.theta_max, lanes, transcript) {
        Ok(g) => g,
        Err(e) => {
            log::warn!("generation failed at step {s}: {e}");
            transcript.note(format!("generation failed, parameters unchanged: {e}"));
            counters.generation_failures += 1;
            return Ok(Intervention { step: s, retrieved, theta: None, verdict: None, entry_id: None });
        }
    };

    let mut verdict = None;
    let mut entry_id = None;
    if cfg.variant.uses_tlrs() {
        match verify(ctx, incident, nominal, &generation.theta, &generation.trace, client, cfg.retry_budget, transcript) {
            Ok(v) => verdict = Some(v.verdict),
            Err(e) => {
                log::warn!("verification failed at step {s}: {e}");
                transcript.note(format!("verification failed, entry stored unverified: {e}"));
                counters.verifier_failures += 1;
            }
        }
        let entry = QaEntry::build(
            db.next_id(s),
            query,
            generation.trace.tau_cond.clone(),
            generation.trace.tau_ctrl.clone(),
            verdict.clone(),
            s,
            embedder,
        );
        match entry.and_then(|e| db.insert(e).map(|e| e.id.clone())) {
            Ok(id) => {
                counters.added += 1;
                if verdict.is_some() {
                    counters.verified += 1;
                }
                transcript.note(format!("stored entry {id}"));
                entry_id = Some(id);
            }
            Err(e) => {
                log::warn!("could not store entry at step {s}: {e}");
                transcript.note(format!("could not store entry: {e}"));
            }
        }
    }

    let installed = controller.apply_params(&generation.theta, s)?.weights.clone();
    transcript.note(format!("installed theta = {:?}", installed));
    Ok(Intervention { step: s, retrieved, theta: Some(installed), verdict, entry_id })
}

/// Runs one scenario starting from `db`, which is returned updated.
pub fn run_with_db(cfg: &ScenarioConfig, opts: &RunOptions, mut db: TrafficLanguageDb) -> Result<RunOutcome, RunError> {
    cfg.validate()?;
    let layout = &cfg.layout;
    let lanes = layout.lane_count();
    let dt = cfg.dt_s;
    let plant = PlantConfig::default();
    let profile = cfg.demand_profile()?;
    let inc = cfg.incident();
    let effects = vec![inc.effect()];
    let nominal = cfg.nominal_params();
    let mut controller = Controller::new(cfg.controller, nominal.clone(), profile.mean_per_second())?;
    let mut signal = SignalState::new(PhaseId(1), cfg.signal_timing());
    let ctx = PromptContext { layout, controller: cfg.controller, theta_min: cfg.theta_min, theta_max: cfg.theta_max };

    let mut state = TrafficState::empty(lanes);
    state.ambulances = profile.ambulances.iter().map(AmbulanceRecord::scheduled).collect();
    let mut veh_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ped_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    ped_rng.set_stream(1);

    let db_start = db.len();
    let mut transcript = Transcript::new();
    transcript.note(format!("scenario {} seed {} backend {}", cfg.label(), cfg.seed, opts.client.name()));
    let mut interventions = Vec::new();
    let mut counters = AgentCounters { generation_failures: 0, verifier_failures: 0, added: 0, verified: 0 };
    let mut trajectory = Trajectory { steps: Vec::with_capacity(cfg.steps() as usize) };
    let mut was_active = false;

    for s in 0..cfg.steps() {
        let t = s as f64 * dt;
        let arrivals = generate_arrivals(&profile, dt, &mut veh_rng)?;
        let peds = generate_pedestrian_arrivals(&profile, dt, &mut ped_rng)?;
        for (flow, count) in profile.pedestrians.iter().zip(peds) {
            for _ in 0..count {
                state.pedestrians.push(PedestrianRecord {
                    arrival_time: t,
                    speed_mps: flow.speed_mps,
                    direction: flow.direction,
                    class: flow.class,
                    crossing_since: None,
                    attempts: 0,
                    completed: false,
                    finished: false,
                });
            }
        }

        let active = inc.is_active(t);
        if was_active && !active && cfg.variant.uses_agent() {
            controller.apply_params(&nominal.weights, s)?;
            transcript.note(format!("##### step {s}: incident over, nominal parameters restored"));
        }
        was_active = active;
        if cfg.variant.uses_agent() && active && s % cfg.q == 0 {
            let description = describe(&inc, cfg, t);
            let record = intervene(
                cfg,
                opts,
                &ctx,
                &description,
                s,
                &nominal.weights,
                &mut controller,
                &mut db,
                &mut transcript,
                &mut counters,
            )?;
            interventions.push(record);
        }

        let mut events: Vec<SignalEvent> = Vec::new();
        if !signal.in_yellow {
            let choice = controller.decide(&state.queue, layout, &signal, dt)?;
            events = signal.apply_decision(choice);
        }
        advance_pedestrians(&mut state, &events, layout, t);
        trajectory.steps.push(StepSnapshot { time_s: t, phase: signal.active_phase, yellow: signal.in_yellow, queue: state.queue.clone() });

        let green = signal.green_mask(layout);
        let report = step(&mut state, &green, &plant, &effects, &arrivals, dt);
        advance_ambulance(&mut state, &report, dt);
        if let Some(ev) = signal.advance(dt) {
            advance_pedestrians(&mut state, &[ev], layout, t + dt);
        }
    }
    if !signal.in_yellow {
        finalize_pedestrians(&mut state, layout, signal.active_phase, signal.elapsed_green);
    }

    let metrics = compute_metrics(&state, cfg.horizon_s, &plant);
    let write = opts.out_dir.is_some();
    let report = MetricsReport {
        name: cfg.label(),
        scenario: cfg.incident.kind.label().into(),
        controller: cfg.controller.label().into(),
        demand: cfg.demand.label().into(),
        variant: cfg.variant.label().into(),
        seed: cfg.seed,
        horizon_s: cfg.horizon_s,
        ad_s: metrics.ad_s,
        aql_m: metrics.aql_m,
        ccr_pct: metrics.ccr_pct,
        ambulance_ad_s: metrics.ambulance_ad_s,
        interventions: interventions.len() as u64,
        generation_failures: counters.generation_failures,
        verifier_failures: counters.verifier_failures,
        db_entries_added: (db.len() - db_start) as u64,
        db_verified_added: counters.verified,
        arrived_veh: state.arrived_total,
        departed_veh: state.departed_total,
        residual_queue_veh: state.total_queue(),
        conservation_residual: state.conservation_residual(),
        trajectory_path: write.then(|| TRAJECTORY_FILE.to_string()),
        transcript_path: write.then(|| TRANSCRIPT_FILE.to_string()),
    };
    debug_assert_eq!(counters.added, report.db_entries_added);

    let outcome = RunOutcome { report, trajectory, transcript, interventions, db, state };
    if let Some(dir) = &opts.out_dir {
        write_artifacts(&outcome, dir, cfg.variant.uses_tlrs())?;
    }
    Ok(outcome)
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> RunError {
    RunError::Io(format!("{}: {e}", path.display()))
}

pub fn write_artifacts(outcome: &RunOutcome, dir: &Path, with_db: bool) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let metrics = dir.join(METRICS_FILE);
    let report = MetricsReport {
        trajectory_path: Some(TRAJECTORY_FILE.to_string()),
        transcript_path: Some(TRANSCRIPT_FILE.to_string()),
        ..outcome.report.clone()
    };
    let mut json = serde_json::to_string_pretty(&report).map_err(|e| io_err(&metrics, e))?;
    json.push('\n');
    fs::write(&metrics, json).map_err(|e| io_err(&metrics, e))?;
    outcome.trajectory.write_csv(&dir.join(TRAJECTORY_FILE))?;
    let transcript = dir.join(TRANSCRIPT_FILE);
    fs::write(&transcript, outcome.transcript.as_str()).map_err(|e| io_err(&transcript, e))?;
    if with_db {
        outcome.db.persist(&dir.join(DB_FILE))?;
    }
    Ok(())
}
