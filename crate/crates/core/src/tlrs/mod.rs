//! Traffic language retrieval: chained incident → condition → control
//! references with cached embeddings and two-step cosine retrieval.

mod database;
mod embed;
mod retrieve;

use serde::Deserialize;
use thiserror::Error;

use crate::agent::Verdict;
use crate::transport::TransportError;

pub use database::{QaEntry, TrafficLanguageDb};
pub use embed::{token_bucket, tokenize, Embedder, HashEmbedder, HttpEmbedder, HASH_DIM};
pub use retrieve::{
    retrieve, retrieve_by_vector, similarity, two_step_by_vector, two_step_retrieve, Hit, RetrievedSet, Stage,
};

pub const DEFAULT_K: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TlrsError {
    #[error("cannot embed text without tokens")]
    EmptyText,
    #[error("embedding backend: {0}")]
    Embedding(String),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("entry id {0} already exists")]
    DuplicateId(String),
    #[error("invalid entry {id}: {message}")]
    InvalidEntry { id: String, message: String },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("database I/O: {0}")]
    Io(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Deserialize)]
pub struct SeedReference {
    pub kind: String,
    pub l_inc: String,
    pub l_cond: String,
    pub l_ctrl: String,
}

const SEED_JSON: &str = include_str!("../../data/seed_references.json");

/// The six hand-authored expert references shipped with the crate.
pub fn seed_references() -> Vec<SeedReference> {
    serde_json::from_str(SEED_JSON).expect("bundled seed references are valid JSON")
}

/// Database holding only the expert references, all marked as accepted.
pub fn seeded_database(embedder: &dyn Embedder) -> Result<TrafficLanguageDb, TlrsError> {
    let mut db = TrafficLanguageDb::new();
    for r in seed_references() {
        let verdict = Verdict::new(true, true, true, format!("Expert {} reference.", r.kind));
        let entry = QaEntry::build(db.next_id(0), r.l_inc, r.l_cond, r.l_ctrl, Some(verdict), 0, embedder)?;
        db.insert(entry)?;
    }
    Ok(db)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_has_three_of_each_kind() {
        let refs = seed_references();
        assert_eq!(refs.len(), 6);
        assert_eq!(refs.iter().filter(|r| r.kind == "accident").count(), 3);
        assert_eq!(refs.iter().filter(|r| r.kind == "maintenance").count(), 3);
        assert_eq!(seeded_database(&HashEmbedder::default()).unwrap().len(), 6);
    }

    #[test]
    fn maintenance_query_prefers_maintenance_references() {
        let e = HashEmbedder::default();
        let db = seeded_database(&e).unwrap();
        let kinds: Vec<String> = seed_references().into_iter().map(|r| r.kind).collect();
        let q = "Time: 08:05 (step 300). Location: west approach, lanes 5 and 6. Type: road maintenance. \
                 Crews are repaving the west approach; lane 5 is closed and lane 6 is narrowed.";
        let r = retrieve(q, Stage::Inc, 2, &db, &e).unwrap();
        for hit in &r.hits {
            let idx = db.entries().iter().position(|x| x.id == hit.entry.id).unwrap();
            assert_eq!(kinds[idx], "maintenance", "{}", hit.entry.l_inc);
        }
        let q = "Time: 08:05 (step 300). Location: west approach, lanes 4, 5, 6, 7. Type: car accident. \
                 A collision blocks every lane of the west approach.";
        let r = retrieve(q, Stage::Inc, 2, &db, &e).unwrap();
        for hit in &r.hits {
            let idx = db.entries().iter().position(|x| x.id == hit.entry.id).unwrap();
            assert_eq!(kinds[idx], "accident", "{}", hit.entry.l_inc);
        }
    }
}
