use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::Verdict;

use super::embed::Embedder;
use super::TlrsError;

const NORM_TOL: f64 = 1e-9;

/// One chained reference: incident text, its traffic-condition reading, and
/// the control operation taken, plus the verifier judgment if one was given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaEntry {
    pub id: String,
    pub l_inc: String,
    pub l_cond: String,
    pub l_ctrl: String,
    /// `None` when the verifier could not be reached.
    pub verdict: Option<Verdict>,
    pub emb_inc: Vec<f64>,
    pub emb_cond: Vec<f64>,
    pub created_at_step: u64,
}

impl QaEntry {
    /// Builds an entry and caches both embeddings.
    pub fn build(
        id: impl Into<String>,
        l_inc: impl Into<String>,
        l_cond: impl Into<String>,
        l_ctrl: impl Into<String>,
        verdict: Option<Verdict>,
        created_at_step: u64,
        embedder: &dyn Embedder,
    ) -> Result<Self, TlrsError> {
        let (l_inc, l_cond, l_ctrl) = (l_inc.into(), l_cond.into(), l_ctrl.into());
        let emb_inc = embedder.embed(&l_inc)?;
        let emb_cond = embedder.embed(&l_cond)?;
        let entry = QaEntry { id: id.into(), l_inc, l_cond, l_ctrl, verdict, emb_inc, emb_cond, created_at_step };
        entry.validate()?;
        Ok(entry)
    }

    pub fn validate(&self) -> Result<(), TlrsError> {
        let bad = |msg: String| Err(TlrsError::InvalidEntry { id: self.id.clone(), message: msg });
        if self.id.trim().is_empty() {
            return bad("empty id".into());
        }
        for (name, text) in [("l_inc", &self.l_inc), ("l_cond", &self.l_cond), ("l_ctrl", &self.l_ctrl)] {
            if text.trim().is_empty() {
                return bad(format!("{name} is empty"));
            }
        }
        if self.emb_inc.len() != self.emb_cond.len() {
            return bad("embedding dimensions differ".into());
        }
        for (name, v) in [("emb_inc", &self.emb_inc), ("emb_cond", &self.emb_cond)] {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if v.iter().any(|x| !x.is_finite()) || (norm - 1.0).abs() > NORM_TOL {
                return bad(format!("{name} is not a unit vector (norm {norm})"));
            }
        }
        Ok(())
    }

    pub fn is_accepted(&self) -> bool {
        self.verdict.as_ref().is_some_and(Verdict::accepted)
    }
}

/// Append-only store of [`QaEntry`] records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrafficLanguageDb {
    entries: Vec<QaEntry>,
    ids: HashSet<String>,
}

impl TrafficLanguageDb {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[QaEntry] {
        &self.entries
    }

    pub fn get(&self, id: &str) -> Option<&QaEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Embedding dimension shared by all entries, if any.
    pub fn dim(&self) -> Option<usize> {
        self.entries.first().map(|e| e.emb_inc.len())
    }

    /// Id for the next entry created at `step`; unique as long as entries
    /// are only ever appended.
    pub fn next_id(&self, step: u64) -> String {
        format!("e{:05}-s{step}", self.entries.len())
    }

    pub fn insert(&mut self, entry: QaEntry) -> Result<&QaEntry, TlrsError> {
        entry.validate()?;
        if self.ids.contains(&entry.id) {
            return Err(TlrsError::DuplicateId(entry.id));
        }
        if let Some(d) = self.dim() {
            if entry.emb_inc.len() != d {
                return Err(TlrsError::InvalidEntry {
                    id: entry.id,
                    message: format!("embedding dimension {} differs from database dimension {d}", entry.emb_inc.len()),
                });
            }
        }
        self.ids.insert(entry.id.clone());
        self.entries.push(entry);
        Ok(self.entries.last().expect("just pushed"))
    }

    /// Writes every entry as one JSON line, replacing `path` atomically.
    pub fn persist(&self, path: &Path) -> Result<(), TlrsError> {
        let mut buf = Vec::new();
        for e in &self.entries {
            serde_json::to_writer(&mut buf, e).map_err(|err| TlrsError::Io(err.to_string()))?;
            buf.push(b'\n');
        }
        let tmp = path.with_extension("jsonl.tmp");
        fs::write(&tmp, &buf).map_err(|err| TlrsError::Io(format!("{}: {err}", tmp.display())))?;
        fs::rename(&tmp, path).map_err(|err| TlrsError::Io(format!("{}: {err}", path.display())))
    }

    /// Appends a single entry line to `path`, creating the file if needed.
    pub fn append_to(entry: &QaEntry, path: &Path) -> Result<(), TlrsError> {
        let mut line = serde_json::to_vec(entry).map_err(|err| TlrsError::Io(err.to_string()))?;
        line.push(b'\n');
        let mut f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|err| TlrsError::Io(format!("{}: {err}", path.display())))?;
        f.write_all(&line).map_err(|err| TlrsError::Io(format!("{}: {err}", path.display())))
    }

    /// Reads a database written by [`persist`](Self::persist). Blank lines are
    /// skipped; the first malformed or invalid record aborts with its line number.
    pub fn load(path: &Path) -> Result<Self, TlrsError> {
        let file = fs::File::open(path).map_err(|err| TlrsError::Io(format!("{}: {err}", path.display())))?;
        let mut db = TrafficLanguageDb::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|err| TlrsError::Parse { line: line_no, message: err.to_string() })?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: QaEntry = serde_json::from_str(&line)
                .map_err(|err| TlrsError::Parse { line: line_no, message: err.to_string() })?;
            db.insert(entry).map_err(|err| TlrsError::Parse { line: line_no, message: err.to_string() })?;
        }
        Ok(db)
    }
}
