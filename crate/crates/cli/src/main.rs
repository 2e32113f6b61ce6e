use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use incident_tsc::agent::{ChatClient, HttpChatClient, IncidentDescription, PromptContext, RuleTable, StubClient, Transcript};
use incident_tsc::control::MpcSettings;
use incident_tsc::runner::{
    initial_database, matrix_configs, references_from_reports, run_with_db, write_matrix_csv,
};
use incident_tsc::tlrs::{retrieve, two_step_retrieve, Embedder, HashEmbedder, HttpEmbedder, Stage, TrafficLanguageDb};
use incident_tsc::{
    run_matrix, ControllerKind, DemandLevel, IncidentKind, RunOptions, ScenarioConfig, ServiceConfig, Variant,
};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "incident-tsc", version, about = "Incident-aware tuning of adaptive signal controllers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its metrics and artifacts.
    Run(RunArgs),
    /// Run a grid of scenarios and write a comparison table.
    Matrix(MatrixArgs),
    /// Build a reference database.
    SeedDb(SeedArgs),
    /// List the entries of a reference database, optionally ranked against a query.
    InspectDb(InspectArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum LlmBackend {
    Stub,
    Http,
}

#[derive(Clone, Copy, ValueEnum)]
enum EmbedBackend {
    Hash,
    Http,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum CtrlArg {
    MaxPressure,
    Mpc,
}

#[derive(Args, Clone)]
struct Backend {
    /// Language model backend.
    #[arg(long, value_enum, default_value = "stub")]
    llm: LlmBackend,
    /// Chat-completions base URL for `--llm http`.
    #[arg(long, env = "INCIDENT_TSC_LLM_URL")]
    llm_url: Option<String>,
    #[arg(long, env = "INCIDENT_TSC_LLM_MODEL", default_value = "gpt-4o")]
    llm_model: String,
    /// Name of the environment variable that holds the API key.
    #[arg(long, default_value = "OPENAI_API_KEY")]
    api_key_env: String,
    /// Stub generator rule table (JSON) replacing the bundled one.
    #[arg(long)]
    generator_rules: Option<PathBuf>,
    /// Stub verifier rule table (JSON) replacing the bundled one.
    #[arg(long)]
    verifier_rules: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "hash")]
    embedder: EmbedBackend,
    /// Embeddings base URL for `--embedder http`.
    #[arg(long, env = "INCIDENT_TSC_EMBED_URL")]
    embed_url: Option<String>,
    #[arg(long, env = "INCIDENT_TSC_EMBED_MODEL", default_value = "text-embedding-3-small")]
    embed_model: String,
}

impl Backend {
    fn service(&self, url: &Option<String>, model: &str, what: &str) -> Result<ServiceConfig> {
        let url = url.clone().with_context(|| format!("--{what}-url (or INCIDENT_TSC_{}_URL) is required", what.to_uppercase()))?;
        let mut cfg = ServiceConfig::new(url, model);
        if std::env::var_os(&self.api_key_env).is_some() {
            cfg.api_key_env = Some(self.api_key_env.clone());
        }
        Ok(cfg)
    }

    fn client(&self) -> Result<Arc<dyn ChatClient>> {
        Ok(match self.llm {
            LlmBackend::Stub => {
                let mut stub = StubClient::default();
                if let Some(p) = &self.generator_rules {
                    stub.generator = RuleTable::load(p)?;
                }
                if let Some(p) = &self.verifier_rules {
                    stub.verifier = RuleTable::load(p)?;
                }
                Arc::new(stub)
            }
            LlmBackend::Http => Arc::new(HttpChatClient::new(self.service(&self.llm_url, &self.llm_model, "llm")?)),
        })
    }

    fn embedder(&self) -> Result<Arc<dyn Embedder>> {
        Ok(match self.embedder {
            EmbedBackend::Hash => Arc::new(HashEmbedder::default()),
            EmbedBackend::Http => {
                Arc::new(HttpEmbedder::new(self.service(&self.embed_url, &self.embed_model, "embed")?))
            }
        })
    }

    fn options(&self) -> Result<RunOptions> {
        Ok(RunOptions { client: self.client()?, embedder: self.embedder()?, out_dir: None })
    }
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (JSON). Without it a preset is built from the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_kind, default_value = "car_accident")]
    scenario: IncidentKind,
    #[arg(long, value_enum, default_value = "max-pressure")]
    controller: CtrlArg,
    /// MPC horizon in decision blocks.
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, value_parser = parse_demand, default_value = "oversaturated")]
    demand: DemandLevel,
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
    #[arg(long)]
    seed: Option<u64>,
    /// Persistent database: read before the run if it exists, written after it.
    #[arg(long)]
    db: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    q: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[command(flatten)]
    backend: Backend,
}

#[derive(Args)]
struct MatrixArgs {
    /// Grid file (JSON): either a list of scenario objects or an object with
    /// `scenarios`, `controllers`, `demands`, `variants` and `seeds` lists.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seeds for the default grid.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    seed: Vec<u64>,
    #[arg(long, value_parser = parse_variant, value_delimiter = ',')]
    variant: Vec<Variant>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    q: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[command(flatten)]
    backend: Backend,
}

#[derive(Args)]
struct SeedArgs {
    /// Destination JSONL file.
    #[arg(long)]
    out: PathBuf,
    /// Incident reports (JSON list) to turn into references through the
    /// generator and verifier. Without it the bundled expert references are used.
    #[arg(long)]
    reports: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "max-pressure")]
    controller: CtrlArg,
    /// Transcript of the generator and verifier exchanges.
    #[arg(long)]
    transcript: Option<PathBuf>,
    #[command(flatten)]
    backend: Backend,
}

#[derive(Args)]
struct InspectArgs {
    /// Database file (JSONL).
    #[arg(long)]
    db: PathBuf,
    /// Rank entries against this incident text with two-step retrieval.
    #[arg(long)]
    query: Option<String>,
    /// Rank by the condition embedding instead of two-step retrieval.
    #[arg(long)]
    condition: bool,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[command(flatten)]
    backend: Backend,
}

fn parse_kind(s: &str) -> Result<IncidentKind, String> {
    IncidentKind::ALL.into_iter().find(|k| k.label() == s).ok_or_else(|| {
        format!("unknown scenario '{s}', expected one of {}", IncidentKind::ALL.map(|k| k.label()).join(", "))
    })
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    Variant::ALL.into_iter().find(|v| v.label() == s).ok_or_else(|| {
        format!("unknown variant '{s}', expected one of {}", Variant::ALL.map(|v| v.label()).join(", "))
    })
}

fn parse_demand(s: &str) -> Result<DemandLevel, String> {
    [DemandLevel::Oversaturated, DemandLevel::Moderate]
        .into_iter()
        .find(|d| d.label() == s)
        .ok_or_else(|| format!("unknown demand '{s}', expected oversaturated or moderate"))
}

fn controller_kind(c: CtrlArg, horizon: Option<usize>) -> ControllerKind {
    match c {
        CtrlArg::MaxPressure => ControllerKind::MaxPressure,
        CtrlArg::Mpc => ControllerKind::Mpc(MpcSettings {
            horizon_slots: horizon.unwrap_or(MpcSettings::default().horizon_slots),
            slot_s: None,
        }),
    }
}

fn read_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ScenarioConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => read_config(p)?,
        None => ScenarioConfig::preset(
            args.scenario,
            args.demand,
            controller_kind(args.controller, args.horizon),
            Variant::Baseline,
            0,
        ),
    };
    if let Some(v) = args.variant {
        cfg.variant = v;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(k) = args.k {
        cfg.k = k;
    }
    if let Some(q) = args.q {
        cfg.q = q;
    }
    if args.db.is_some() && !cfg.variant.uses_tlrs() {
        bail!("--db only applies to the llm_tlrs variant");
    }
    cfg.validate()?;

    let opts = RunOptions { out_dir: Some(args.out.clone()), ..args.backend.options()? };
    let db = match &args.db {
        Some(p) if p.exists() => TrafficLanguageDb::load(p).with_context(|| format!("loading {}", p.display()))?,
        _ => initial_database(&cfg, opts.embedder.as_ref())?,
    };
    let outcome = run_with_db(&cfg, &opts, db)?;
    if let Some(p) = &args.db {
        outcome.db.persist(p).with_context(|| format!("writing {}", p.display()))?;
    }
    println!("{}", serde_json::to_string_pretty(&outcome.report)?);
    Ok(())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum GridFile {
    List(Vec<ScenarioConfig>),
    Axes(Axes),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Axes {
    #[serde(default = "all_kinds")]
    scenarios: Vec<IncidentKind>,
    #[serde(default = "both_controllers")]
    controllers: Vec<ControllerKind>,
    #[serde(default = "both_demands")]
    demands: Vec<DemandLevel>,
    #[serde(default = "all_variants")]
    variants: Vec<Variant>,
    #[serde(default = "one_seed")]
    seeds: Vec<u64>,
}

fn all_kinds() -> Vec<IncidentKind> {
    IncidentKind::ALL.to_vec()
}
fn both_controllers() -> Vec<ControllerKind> {
    vec![ControllerKind::MaxPressure, ControllerKind::Mpc(MpcSettings::default())]
}
fn both_demands() -> Vec<DemandLevel> {
    vec![DemandLevel::Oversaturated, DemandLevel::Moderate]
}
fn all_variants() -> Vec<Variant> {
    Variant::ALL.to_vec()
}
fn one_seed() -> Vec<u64> {
    vec![1]
}

fn matrix(args: MatrixArgs) -> Result<bool> {
    let mut configs = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            match serde_json::from_str::<GridFile>(&text).with_context(|| format!("parsing {}", p.display()))? {
                GridFile::List(list) => list,
                GridFile::Axes(a) => matrix_configs(&a.scenarios, &a.controllers, &a.demands, &a.variants, &a.seeds),
            }
        }
        None => {
            let variants = if args.variant.is_empty() { all_variants() } else { args.variant.clone() };
            matrix_configs(&all_kinds(), &both_controllers(), &both_demands(), &variants, &args.seed)
        }
    };
    for cfg in &mut configs {
        if let Some(k) = args.k {
            cfg.k = k;
        }
        if let Some(q) = args.q {
            cfg.q = q;
        }
    }
    let opts = RunOptions { out_dir: Some(args.out.clone()), ..args.backend.options()? };
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let rows = run_matrix(&configs, &opts);
    let table = args.out.join("matrix.csv");
    write_matrix_csv(&rows, &table)?;
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    for r in rows.iter().filter(|r| r.status != "ok") {
        log::error!("{} {} {} {} {}: {}", r.scenario, r.controller, r.demand, r.variant, r.encounter, r.status);
    }
    println!("{} rows ({failed} failed) written to {}", rows.len(), table.display());
    Ok(failed == 0)
}

fn seed_db(args: SeedArgs) -> Result<()> {
    let embedder = args.backend.embedder()?;
    let db = match &args.reports {
        None => incident_tsc::tlrs::seeded_database(embedder.as_ref())?,
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let reports: Vec<IncidentDescription> =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            let layout = incident_tsc::IntersectionLayout::four_phase();
            let ctx = PromptContext {
                layout: &layout,
                controller: controller_kind(args.controller, None),
                theta_min: 0.0,
                theta_max: incident_tsc::control::DEFAULT_THETA_MAX,
            };
            let client = args.backend.client()?;
            let mut transcript = Transcript::new();
            let db = references_from_reports(
                &reports,
                &ctx,
                client.as_ref(),
                embedder.as_ref(),
                incident_tsc::agent::DEFAULT_RETRY_BUDGET,
                &mut transcript,
            )?;
            if let Some(t) = &args.transcript {
                fs::write(t, transcript.as_str()).with_context(|| format!("writing {}", t.display()))?;
            }
            db
        }
    };
    db.persist(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    println!("{} entries written to {}", db.len(), args.out.display());
    Ok(())
}

fn inspect_db(args: InspectArgs) -> Result<()> {
    let db = TrafficLanguageDb::load(&args.db).with_context(|| format!("loading {}", args.db.display()))?;
    println!("{} entries, embedding dimension {}", db.len(), db.dim().map_or("-".into(), |d| d.to_string()));
    let Some(query) = &args.query else {
        for e in db.entries() {
            let verdict = match &e.verdict {
                Some(v) => format!("nu={} ({}{}{})", v.nu(), v.nu_cond as u8, v.nu_ctrl as u8, v.nu_map as u8),
                None => "unverified".into(),
            };
            println!("{}  step {:>5}  {verdict}  {}", e.id, e.created_at_step, first_line(&e.l_inc));
        }
        return Ok(());
    };
    let embedder = args.backend.embedder()?;
    let hits = if args.condition {
        retrieve(query, Stage::Cond, args.k, &db, embedder.as_ref())?
    } else {
        two_step_retrieve(query, args.k, &db, embedder.as_ref())?
    };
    for h in &hits.hits {
        println!("{}  {:?}  {:.4}  {}", h.entry.id, h.stage, h.score, first_line(&h.entry.l_inc));
    }
    Ok(())
}

fn first_line(s: &str) -> &str {
    let line = s.lines().next().unwrap_or("");
    match line.char_indices().nth(100) {
        Some((i, _)) => &line[..i],
        None => line,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a).map(|_| true),
        Command::Matrix(a) => matrix(a),
        Command::SeedDb(a) => seed_db(a).map(|_| true),
        Command::InspectDb(a) => inspect_db(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
