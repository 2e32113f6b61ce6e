use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::database::{QaEntry, TrafficLanguageDb};
use super::embed::Embedder;
use super::TlrsError;

/// Which cached embedding a query is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Inc,
    Cond,
}

impl Stage {
    fn embedding(self, e: &QaEntry) -> &[f64] {
        match self {
            Stage::Inc => &e.emb_inc,
            Stage::Cond => &e.emb_cond,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit<'a> {
    pub entry: &'a QaEntry,
    pub score: f64,
    pub stage: Stage,
}

/// Ranked references. After two-step retrieval the incident-stage hits come
/// first, followed by the condition-stage hits.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RetrievedSet<'a> {
    pub hits: Vec<Hit<'a>>,
}

impl<'a> RetrievedSet<'a> {
    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn ids(&self) -> Vec<&'a str> {
        self.hits.iter().map(|h| h.entry.id.as_str()).collect()
    }
}

/// Dot product summed left to right.
pub fn similarity(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Top-`k` entries by cosine between `query` (unit norm) and the stage
/// embedding. Ties go to the earlier `created_at_step`, then insertion order.
pub fn retrieve_by_vector<'a>(query: &[f64], stage: Stage, k: usize, db: &'a TrafficLanguageDb) -> RetrievedSet<'a> {
    let mut scored: Vec<(usize, f64)> =
        db.entries().iter().enumerate().map(|(i, e)| (i, similarity(query, stage.embedding(e)))).collect();
    let entries = db.entries();
    scored.sort_by(|(ia, sa), (ib, sb)| {
        sb.total_cmp(sa)
            .then(entries[*ia].created_at_step.cmp(&entries[*ib].created_at_step))
            .then(ia.cmp(ib))
    });
    scored.truncate(k);
    RetrievedSet { hits: scored.into_iter().map(|(i, score)| Hit { entry: &entries[i], score, stage }).collect() }
}

pub fn retrieve<'a>(
    query: &str,
    stage: Stage,
    k: usize,
    db: &'a TrafficLanguageDb,
    embedder: &dyn Embedder,
) -> Result<RetrievedSet<'a>, TlrsError> {
    if k == 0 {
        return Err(TlrsError::InvalidK);
    }
    if db.is_empty() {
        return Ok(RetrievedSet::default());
    }
    let q = embedder.embed(query)?;
    check_dim(&q, db)?;
    Ok(retrieve_by_vector(&q, stage, k, db))
}

fn check_dim(q: &[f64], db: &TrafficLanguageDb) -> Result<(), TlrsError> {
    match db.dim() {
        Some(d) if d != q.len() => Err(TlrsError::Embedding(format!(
            "query dimension {} differs from database dimension {d}",
            q.len()
        ))),
        _ => Ok(()),
    }
}

/// Incident-stage retrieval followed by a condition-stage expansion from each
/// hit's cached condition embedding; duplicates keep their first occurrence.
pub fn two_step_retrieve<'a>(
    incident_text: &str,
    k: usize,
    db: &'a TrafficLanguageDb,
    embedder: &dyn Embedder,
) -> Result<RetrievedSet<'a>, TlrsError> {
    let first = retrieve(incident_text, Stage::Inc, k, db, embedder)?;
    Ok(expand(first, k, db))
}

/// Same as [`two_step_retrieve`] with a precomputed query embedding.
pub fn two_step_by_vector<'a>(query: &[f64], k: usize, db: &'a TrafficLanguageDb) -> RetrievedSet<'a> {
    expand(retrieve_by_vector(query, Stage::Inc, k, db), k, db)
}

fn expand<'a>(first: RetrievedSet<'a>, k: usize, db: &'a TrafficLanguageDb) -> RetrievedSet<'a> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for hit in &first.hits {
        if seen.insert(hit.entry.id.as_str()) {
            out.push(*hit);
        }
    }
    for anchor in &first.hits {
        for hit in retrieve_by_vector(&anchor.entry.emb_cond, Stage::Cond, k, db).hits {
            if seen.insert(hit.entry.id.as_str()) {
                out.push(hit);
            }
        }
    }
    RetrievedSet { hits: out }
}
