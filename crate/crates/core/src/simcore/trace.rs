//! JSON Lines trace: one record per decision and per completion.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DelayBreakdown, TaskId, TaskKind};

/// Risk-ledger state of the deciding agent after a completion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub agent: usize,
    pub n: usize,
    pub eta_before: f64,
    pub eta_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceRecord {
    Decision {
        at: f64,
        task: TaskId,
        kind: TaskKind,
        iot: usize,
        source: usize,
        destination: usize,
        /// Remaining battery fraction of every UAV at decision time.
        battery: Vec<f64>,
    },
    Completion {
        at: f64,
        task: TaskId,
        kind: TaskKind,
        source: usize,
        /// `None` when the task was lost at a depleted receiving UAV.
        destination: Option<usize>,
        delay: DelayBreakdown,
        total: f64,
        violated: bool,
        depleted: bool,
        battery: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ledger: Option<LedgerSnapshot>,
    },
}

impl TraceRecord {
    pub fn at(&self) -> f64 {
        match self {
            TraceRecord::Decision { at, .. } | TraceRecord::Completion { at, .. } => *at,
        }
    }
}

pub fn write_jsonl(path: &Path, records: &[TraceRecord]) -> Result<()> {
    let mut out = Vec::with_capacity(records.len() * 160);
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::format("trace record", e))?;
        out.push(b'\n');
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))
}

pub fn read_jsonl(path: &Path) -> Result<Vec<TraceRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::format("trace record", e)))
        .collect()
}
