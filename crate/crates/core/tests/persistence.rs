//! Round trips and corruption handling for the JSON-lines database.

mod support;

use std::fs;

use incident_tsc::runner::{run_scenario, RunError, RunOptions};
use incident_tsc::tlrs::{seeded_database, HashEmbedder, TlrsError, TrafficLanguageDb};
use incident_tsc::{ControllerKind, DemandLevel, IncidentKind, ScenarioConfig, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn write_lines(path: &std::path::Path, lines: &[String]) {
    fs::write(path, lines.join("\n") + "\n").unwrap();
}

fn lines_of(db: &TrafficLanguageDb, dir: &std::path::Path) -> Vec<String> {
    let path = dir.join("src.jsonl");
    db.persist(&path).unwrap();
    fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}

fn parse_line(err: TlrsError) -> usize {
    match err {
        TlrsError::Parse { line, .. } => line,
        other => panic!("expected a parse error, got {other}"),
    }
}

#[test]
fn random_databases_round_trip_byte_identically() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dir = tempfile::tempdir().unwrap();
    for round in 0..20 {
        let size = rng.random_range(0..60);
        let db = support::random_db(&mut rng, size, 16);
        let a = dir.path().join(format!("a{round}.jsonl"));
        let b = dir.path().join(format!("b{round}.jsonl"));
        db.persist(&a).unwrap();
        let back = TrafficLanguageDb::load(&a).unwrap();
        assert_eq!(back.entries(), db.entries());
        back.persist(&b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        assert!(!a.with_extension("jsonl.tmp").exists());
    }
}

#[test]
fn garbage_on_a_random_line_is_reported_with_its_number() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("db.jsonl");
    for _ in 0..25 {
        let db = support::random_db(&mut rng, 30, 8);
        let mut lines = lines_of(&db, dir.path());
        let victim = rng.random_range(0..lines.len());
        let cut = rng.random_range(1..lines[victim].len());
        lines[victim].truncate(cut);
        write_lines(&path, &lines);
        assert_eq!(parse_line(TrafficLanguageDb::load(&path).unwrap_err()), victim + 1);
    }
}

#[test]
fn blank_lines_are_skipped_but_still_counted() {
    let dir = tempfile::tempdir().unwrap();
    let db = seeded_database(&HashEmbedder::default()).unwrap();
    let mut lines = lines_of(&db, dir.path());
    lines.insert(2, String::new());
    lines.insert(4, "   ".into());
    lines[6] = "{}".into();
    let path = dir.path().join("db.jsonl");
    write_lines(&path, &lines);
    assert_eq!(parse_line(TrafficLanguageDb::load(&path).unwrap_err()), 7);
    lines.remove(6);
    write_lines(&path, &lines);
    assert_eq!(TrafficLanguageDb::load(&path).unwrap().len(), db.len() - 1);
}

#[test]
fn duplicate_ids_and_invalid_embeddings_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("db.jsonl");
    let db = seeded_database(&HashEmbedder::default()).unwrap();
    let base = lines_of(&db, dir.path());

    let mut dup = base.clone();
    dup.push(base[1].clone());
    write_lines(&path, &dup);
    let err = TrafficLanguageDb::load(&path).unwrap_err();
    assert!(err.to_string().contains("already exists"), "{err}");
    assert_eq!(parse_line(err), base.len() + 1);

    let mut scaled: serde_json::Value = serde_json::from_str(&base[3]).unwrap();
    for x in scaled["emb_inc"].as_array_mut().unwrap() {
        *x = serde_json::json!(x.as_f64().unwrap() * 2.0);
    }
    let mut bad = base.clone();
    bad[3] = scaled.to_string();
    write_lines(&path, &bad);
    assert_eq!(parse_line(TrafficLanguageDb::load(&path).unwrap_err()), 4);

    let mut short: serde_json::Value = serde_json::from_str(&base[2]).unwrap();
    short["emb_inc"] = serde_json::json!([1.0]);
    short["emb_cond"] = serde_json::json!([1.0]);
    let mut bad = base;
    bad[2] = short.to_string();
    write_lines(&path, &bad);
    let err = TrafficLanguageDb::load(&path).unwrap_err();
    assert!(err.to_string().contains("dimension"), "{err}");
    assert_eq!(parse_line(err), 3);
}

#[test]
fn interrupted_append_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("db.jsonl");
    let db = seeded_database(&HashEmbedder::default()).unwrap();
    db.persist(&path).unwrap();
    let extra = support::random_db(&mut ChaCha8Rng::seed_from_u64(1), 1, db.dim().unwrap());
    TrafficLanguageDb::append_to(&extra.entries()[0], &path).unwrap();
    assert_eq!(TrafficLanguageDb::load(&path).unwrap().len(), db.len() + 1);

    let mut bytes = fs::read(&path).unwrap();
    bytes.truncate(bytes.len() - 40);
    fs::write(&path, bytes).unwrap();
    assert_eq!(parse_line(TrafficLanguageDb::load(&path).unwrap_err()), db.len() + 1);
}

#[test]
fn a_corrupt_seed_file_stops_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("seed.jsonl");
    let db = seeded_database(&HashEmbedder::default()).unwrap();
    let mut lines = lines_of(&db, dir.path());
    lines[0] = "not json".into();
    write_lines(&path, &lines);

    let mut cfg = ScenarioConfig::preset(
        IncidentKind::CarAccident,
        DemandLevel::Moderate,
        ControllerKind::MaxPressure,
        Variant::LlmTlrs,
        1,
    );
    cfg.seed_db = Some(path);
    match run_scenario(&cfg, &RunOptions::default()) {
        Err(e @ RunError::Tlrs(_)) => assert!(e.to_string().contains("line 1"), "{e}"),
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("run should not start with a corrupt seed file"),
    }
}
