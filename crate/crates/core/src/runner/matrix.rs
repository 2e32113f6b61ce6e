use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::ControllerKind;
use crate::scenario::{DemandLevel, IncidentKind, ScenarioConfig, Variant};

use super::{initial_database, run_with_db, write_artifacts, MetricsReport, RunError, RunOptions};

/// One line of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub scenario: String,
    pub controller: String,
    pub demand: String,
    pub variant: String,
    /// "I"/"II" for chained encounters of an unseen incident, empty otherwise.
    pub encounter: String,
    pub seed: u64,
    pub ad_s: Option<f64>,
    pub aql_m: Option<f64>,
    pub ccr_pct: Option<f64>,
    pub ambulance_ad_s: Option<f64>,
    /// "ok" or the error message.
    pub status: String,
}

impl MatrixRow {
    fn from_report(r: &MetricsReport, encounter: &str) -> Self {
        MatrixRow {
            scenario: r.scenario.clone(),
            controller: r.controller.clone(),
            demand: r.demand.clone(),
            variant: r.variant.clone(),
            encounter: encounter.into(),
            seed: r.seed,
            ad_s: Some(r.ad_s),
            aql_m: Some(r.aql_m),
            ccr_pct: r.ccr_pct,
            ambulance_ad_s: r.ambulance_ad_s,
            status: "ok".into(),
        }
    }

    fn failed(cfg: &ScenarioConfig, encounter: &str, err: &RunError) -> Self {
        MatrixRow {
            scenario: cfg.incident.kind.label().into(),
            controller: cfg.controller.label().into(),
            demand: cfg.demand.label().into(),
            variant: cfg.variant.label().into(),
            encounter: encounter.into(),
            seed: cfg.seed,
            ad_s: None,
            aql_m: None,
            ccr_pct: None,
            ambulance_ad_s: None,
            status: err.to_string(),
        }
    }
}

/// Subdirectory name for a run's artifacts.
fn run_dir(root: &Path, cfg: &ScenarioConfig, encounter: &str) -> PathBuf {
    let mut name = cfg.label();
    if !encounter.is_empty() {
        name.push('-');
        name.push_str(encounter);
    }
    root.join(name)
}

fn run_one(cfg: &ScenarioConfig, opts: &RunOptions) -> Vec<MatrixRow> {
    let chained = cfg.variant.uses_tlrs() && cfg.incident.kind.is_unseen();
    let encounters: &[&str] = if chained { &["I", "II"] } else { &[""] };
    let mut db = match initial_database(cfg, opts.embedder.as_ref()) {
        Ok(db) => db,
        Err(e) => return encounters.iter().map(|enc| MatrixRow::failed(cfg, enc, &e)).collect(),
    };
    let mut rows = Vec::new();
    for (i, enc) in encounters.iter().enumerate() {
        let local = RunOptions { out_dir: None, ..opts.clone() };
        match run_with_db(cfg, &local, db.clone()) {
            Ok(outcome) => {
                rows.push(MatrixRow::from_report(&outcome.report, enc));
                if let Some(root) = &opts.out_dir {
                    if let Err(e) = write_artifacts(&outcome, &run_dir(root, cfg, enc), cfg.variant.uses_tlrs()) {
                        log::warn!("{}: {e}", cfg.label());
                    }
                }
                db = outcome.db;
            }
            Err(e) => {
                rows.extend(encounters[i..].iter().map(|enc| MatrixRow::failed(cfg, enc, &e)));
                break;
            }
        }
    }
    rows
}

/// Every combination of the given axes, in a stable order.
pub fn matrix_configs(
    kinds: &[IncidentKind],
    controllers: &[ControllerKind],
    demands: &[DemandLevel],
    variants: &[Variant],
    seeds: &[u64],
) -> Vec<ScenarioConfig> {
    let mut out = Vec::new();
    for &kind in kinds {
        for &controller in controllers {
            for &demand in demands {
                for &variant in variants {
                    for &seed in seeds {
                        out.push(ScenarioConfig::preset(kind, demand, controller, variant, seed));
                    }
                }
            }
        }
    }
    out
}

/// Runs configurations in parallel. A failing run yields rows with an error
/// status instead of aborting the matrix. Unseen incidents under `llm_tlrs`
/// run twice, the second encounter starting from the database left by the first.
pub fn run_matrix(configs: &[ScenarioConfig], opts: &RunOptions) -> Vec<MatrixRow> {
    configs.par_iter().flat_map_iter(|cfg| run_one(cfg, opts)).collect()
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "N/A".to_string(), |x| format!("{x:.3}"))
}

pub fn write_matrix_csv(rows: &[MatrixRow], path: &Path) -> Result<(), RunError> {
    let err = |e: csv::Error| RunError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record([
        "scenario", "controller", "demand", "variant", "encounter", "seed", "ad_s", "aql_m", "ccr_pct", "ambulance_ad_s",
        "status",
    ])
    .map_err(err)?;
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            r.controller.clone(),
            r.demand.clone(),
            r.variant.clone(),
            r.encounter.clone(),
            r.seed.to_string(),
            cell(r.ad_s),
            cell(r.aql_m),
            cell(r.ccr_pct),
            cell(r.ambulance_ad_s),
            r.status.clone(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| RunError::Io(format!("{}: {e}", path.display())))
}
