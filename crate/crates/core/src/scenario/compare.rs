//! Forensic comparison of two runs from the ground's point of view.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::ground::{GroundDatabase, IndexRow};

use super::artifacts::RunArtifacts;

/// Differences listed in full before the rest are only counted.
pub const MAX_LISTED_DIFFERENCES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Indistinguishable,
    Distinguishable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub verdict: Verdict,
    pub masked_fields: Vec<String>,
    pub difference_count: usize,
    pub differences: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompareError {
    #[error("runs used different operator scripts ({a} vs {b})")]
    ScriptMismatch { a: String, b: String },
}

/// Expands mask entries: a tag becomes every field carrying it, anything else is a field name.
pub fn resolve_mask(db: &GroundDatabase, mask: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for m in mask {
        let tagged = db.tagged_fields(m);
        if tagged.is_empty() {
            out.push(m.clone());
        } else {
            out.extend(tagged);
        }
    }
    out.sort();
    out.dedup();
    out
}

fn masked(row: &IndexRow, mask: &[String]) -> IndexRow {
    let mut r = row.clone();
    for m in mask {
        if let Some(v) = r.fields.get_mut(m) {
            *v = Value::String("*".into());
        }
    }
    r
}

struct Diff {
    count: usize,
    listed: Vec<String>,
}

impl Diff {
    fn note(&mut self, msg: impl FnOnce() -> String) {
        self.count += 1;
        if self.listed.len() < MAX_LISTED_DIFFERENCES {
            self.listed.push(msg());
        }
    }

    fn seq<T: PartialEq + Serialize>(&mut self, what: &str, a: &[T], b: &[T]) {
        if a.len() != b.len() {
            self.note(|| format!("{what}: {} entries vs {}", a.len(), b.len()));
        }
        for (i, (x, y)) in a.iter().zip(b).enumerate() {
            if x != y {
                let js = |v: &T| serde_json::to_string(v).unwrap_or_default();
                self.note(|| format!("{what}[{i}]: {} vs {}", js(x), js(y)));
            }
        }
    }
}

/// Field-wise diff of command log, HK history and the masked archive index.
pub fn compare_runs(a: &RunArtifacts, b: &RunArtifacts, mask: &[String]) -> Result<Comparison, CompareError> {
    if a.scenario.operator_script != b.scenario.operator_script {
        return Err(CompareError::ScriptMismatch {
            a: a.scenario.name.clone(),
            b: b.scenario.name.clone(),
        });
    }
    let mut d = Diff {
        count: 0,
        listed: Vec::new(),
    };
    d.seq("cmdlog", &a.cmdlog, &b.cmdlog);
    d.seq("hk_history", &a.hk_history, &b.hk_history);
    let ia: Vec<IndexRow> = a.index.iter().map(|r| masked(r, mask)).collect();
    let ib: Vec<IndexRow> = b.index.iter().map(|r| masked(r, mask)).collect();
    d.seq("tlm_index", &ia, &ib);
    Ok(Comparison {
        verdict: if d.count == 0 {
            Verdict::Indistinguishable
        } else {
            Verdict::Distinguishable
        },
        masked_fields: mask.to_vec(),
        difference_count: d.count,
        differences: d.listed,
    })
}
