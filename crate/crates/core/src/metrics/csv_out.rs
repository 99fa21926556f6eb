//! CSV artifacts. Column layouts are described in `docs/kpi_schema.md`.

use std::path::Path;

use super::report::{KpiReport, KpiRow};
use crate::error::{Error, Result};

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format("csv", format!("{}: {other:?}", path.display())),
    }
}

fn finish(path: &Path, mut w: csv::Writer<std::fs::File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// `policy,seed,<columns…>`, one line per row.
pub fn write_kpi_rows(path: &Path, columns: &[String], rows: &[KpiRow]) -> Result<()> {
    let mut w = writer(path)?;
    let header = ["policy", "seed"]
        .into_iter()
        .map(String::from)
        .chain(columns.iter().cloned());
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        let rec = [r.policy.clone(), r.seed.clone()]
            .into_iter()
            .chain(r.values.iter().map(|&v| num(v)));
        w.write_record(rec).map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

/// `episode,uav0,uav1,…`: per-agent episode reward sums.
pub fn write_reward_trace(path: &Path, traces: &[Vec<f64>]) -> Result<()> {
    let mut w = writer(path)?;
    let header = std::iter::once("episode".to_string())
        .chain((0..traces.len()).map(|j| format!("uav{j}")));
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    let episodes = traces.iter().map(Vec::len).max().unwrap_or(0);
    for e in 0..episodes {
        let rec = std::iter::once(e.to_string())
            .chain(traces.iter().map(|t| t.get(e).map_or(String::new(), |&v| num(v))));
        w.write_record(rec).map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = xs.collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

/// Per-policy seed lists of reports.
pub type PolicyReports<'a> = [(&'a str, &'a [KpiReport])];

/// `policy,uav,remaining_energy`: seed-averaged final battery per UAV.
pub fn write_energy_figure(path: &Path, reports: &PolicyReports<'_>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["policy", "uav", "remaining_energy"])
        .map_err(|e| csv_error(path, e))?;
    for (policy, rs) in reports {
        let uavs = rs.first().map_or(0, |r| r.remaining_energy.len());
        for j in 0..uavs {
            let m = mean(rs.iter().map(|r| r.remaining_energy[j]));
            w.write_record([policy.to_string(), j.to_string(), num(m)])
                .map_err(|e| csv_error(path, e))?;
        }
    }
    finish(path, w)
}

/// `policy,task_type,violations,violation_rate`: seed-averaged.
pub fn write_violation_figure(path: &Path, reports: &PolicyReports<'_>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["policy", "task_type", "violations", "violation_rate"])
        .map_err(|e| csv_error(path, e))?;
    for (policy, rs) in reports {
        let Some(first) = rs.first() else { continue };
        for (i, t) in first.violations.iter().enumerate() {
            let count = mean(rs.iter().map(|r| r.violations[i].violations as f64));
            let rate = mean(rs.iter().map(|r| r.violations[i].rate()));
            w.write_record([policy.to_string(), t.kind.label().to_string(), num(count), num(rate)])
                .map_err(|e| csv_error(path, e))?;
        }
    }
    finish(path, w)
}

/// `policy,node,count,mean,p50,p90,p99`: seed-averaged per-node delays.
pub fn write_delay_figure(path: &Path, reports: &PolicyReports<'_>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["policy", "node", "count", "mean", "p50", "p90", "p99"])
        .map_err(|e| csv_error(path, e))?;
    for (policy, rs) in reports {
        let nodes = rs.first().map_or(0, |r| r.node_delays.len());
        for n in 0..nodes {
            let col = |f: fn(&super::DelaySummary) -> f64| mean(rs.iter().map(|r| f(&r.node_delays[n])));
            w.write_record([
                policy.to_string(),
                n.to_string(),
                num(col(|d| d.count as f64)),
                num(col(|d| d.mean)),
                num(col(|d| d.p50)),
                num(col(|d| d.p90)),
                num(col(|d| d.p99)),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
    }
    finish(path, w)
}
