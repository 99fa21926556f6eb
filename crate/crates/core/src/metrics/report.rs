use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ScenarioConfig, TaskKind};
use crate::simcore::TraceRecord;

/// Weights of the scalar objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectiveParams {
    /// Energy weight `W`.
    pub weight: f64,
    /// Delay normalizer.
    pub delay_norm: f64,
    /// Violation-count normalizer; the scenario's expected task count when
    /// unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violation_norm: Option<f64>,
}

impl Default for ObjectiveParams {
    fn default() -> Self {
        ObjectiveParams {
            weight: 0.5,
            delay_norm: 15.0,
            violation_norm: None,
        }
    }
}

impl ObjectiveParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.weight) {
            return Err(Error::config("objective.weight must lie in [0, 1]"));
        }
        if !(self.delay_norm > 0.0 && self.delay_norm.is_finite()) {
            return Err(Error::config("objective.delay_norm must be > 0"));
        }
        if let Some(v) = self.violation_norm {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config("objective.violation_norm must be > 0"));
            }
        }
        Ok(())
    }

    pub fn violation_norm_for(&self, cfg: &ScenarioConfig) -> f64 {
        self.violation_norm
            .unwrap_or_else(|| cfg.expected_task_count().max(1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeViolations {
    pub kind: TaskKind,
    pub generated: usize,
    pub violations: usize,
}

impl TypeViolations {
    pub fn rate(&self) -> f64 {
        if self.generated == 0 {
            0.0
        } else {
            self.violations as f64 / self.generated as f64
        }
    }
}

/// End-to-end delay distribution of the tasks a node completed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelaySummary {
    pub node: usize,
    pub count: usize,
    pub mean: f64,
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    pub generated: usize,
    pub completed: usize,
    pub lost: usize,
    /// Remaining battery fraction per UAV at the end of the run.
    pub remaining_energy: Vec<f64>,
    pub min_remaining_energy: f64,
    /// One entry per task type, in scenario order.
    pub violations: Vec<TypeViolations>,
    pub total_violations: usize,
    pub violation_rate: f64,
    /// Mean end-to-end delay δ over completed tasks.
    pub mean_delay: f64,
    /// False when no task completed and `mean_delay` is a placeholder 0.
    pub mean_delay_defined: bool,
    pub node_delays: Vec<DelaySummary>,
    pub objective: f64,
}

impl KpiReport {
    pub fn violations_of(&self, kind: TaskKind) -> usize {
        self.violations
            .iter()
            .filter(|v| v.kind == kind)
            .map(|v| v.violations)
            .sum()
    }
}

/// Nearest-rank percentile of an ascending slice; 0 when empty.
pub fn percentile(sorted: &[f64], pct: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (pct / 100.0 * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// `W·min energy − (1 − W)/(2Θ_M)·δ − (1 − W)/(2Θ_D)·violations`.
pub fn objective(
    min_remaining_energy: f64,
    mean_delay: f64,
    total_violations: f64,
    weight: f64,
    delay_norm: f64,
    violation_norm: f64,
) -> f64 {
    weight * min_remaining_energy
        - (1.0 - weight) / (2.0 * delay_norm) * mean_delay
        - (1.0 - weight) / (2.0 * violation_norm) * total_violations
}

/// KPIs of one run from its trace and final battery levels.
pub fn compute_kpis(
    cfg: &ScenarioConfig,
    trace: &[TraceRecord],
    final_energy: &[f64],
    params: &ObjectiveParams,
) -> KpiReport {
    let mut kinds: Vec<TaskKind> = Vec::new();
    for t in &cfg.task_types {
        if !kinds.contains(&t.kind) {
            kinds.push(t.kind);
        }
    }
    let mut violations: Vec<TypeViolations> = kinds
        .iter()
        .map(|&kind| TypeViolations {
            kind,
            generated: 0,
            violations: 0,
        })
        .collect();
    let mut per_node: Vec<Vec<f64>> = vec![Vec::new(); cfg.num_nodes()];
    let (mut generated, mut lost) = (0, 0);
    let mut delays = Vec::new();
    for r in trace {
        let TraceRecord::Completion {
            kind,
            destination,
            total,
            violated,
            depleted,
            ..
        } = r
        else {
            continue;
        };
        generated += 1;
        if let Some(v) = violations.iter_mut().find(|v| v.kind == *kind) {
            v.generated += 1;
            v.violations += usize::from(*violated);
        }
        if *depleted {
            lost += 1;
            continue;
        }
        delays.push(*total);
        if let Some(d) = *destination {
            per_node[d].push(*total);
        }
    }
    let total_violations: usize = violations.iter().map(|v| v.violations).sum();
    let completed = delays.len();
    let mean_delay = if completed == 0 {
        0.0
    } else {
        delays.iter().sum::<f64>() / completed as f64
    };
    let node_delays = per_node
        .into_iter()
        .enumerate()
        .map(|(node, mut d)| {
            d.sort_by(f64::total_cmp);
            DelaySummary {
                node,
                count: d.len(),
                mean: if d.is_empty() { 0.0 } else { d.iter().sum::<f64>() / d.len() as f64 },
                p50: percentile(&d, 50.0),
                p90: percentile(&d, 90.0),
                p99: percentile(&d, 99.0),
            }
        })
        .collect();
    let min_remaining_energy = final_energy.iter().copied().fold(f64::INFINITY, f64::min);
    let min_remaining_energy = if min_remaining_energy.is_finite() {
        min_remaining_energy
    } else {
        1.0
    };
    KpiReport {
        generated,
        completed,
        lost,
        remaining_energy: final_energy.to_vec(),
        min_remaining_energy,
        violations,
        total_violations,
        violation_rate: if generated == 0 {
            0.0
        } else {
            total_violations as f64 / generated as f64
        },
        mean_delay,
        mean_delay_defined: completed > 0,
        node_delays,
        objective: objective(
            min_remaining_energy,
            mean_delay,
            total_violations as f64,
            params.weight,
            params.delay_norm,
            params.violation_norm_for(cfg),
        ),
    }
}

/// A flat CSV row of KPI values under a fixed column list.
#[derive(Debug, Clone, PartialEq)]
pub struct KpiRow {
    pub policy: String,
    /// Seed number, or `mean` for an averaged row.
    pub seed: String,
    pub values: Vec<f64>,
}

impl KpiReport {
    /// Column names matching [`KpiReport::values`].
    pub fn columns(&self) -> Vec<String> {
        let mut c: Vec<String> = [
            "generated",
            "completed",
            "lost",
            "min_remaining_energy",
        ]
        .into_iter()
        .map(String::from)
        .collect();
        c.extend((0..self.remaining_energy.len()).map(|j| format!("remaining_energy_uav{j}")));
        for v in &self.violations {
            c.push(format!("violations_{}", v.kind.label()));
            c.push(format!("violation_rate_{}", v.kind.label()));
        }
        c.extend(
            ["total_violations", "violation_rate", "mean_delay", "mean_delay_defined"]
                .map(String::from),
        );
        for d in &self.node_delays {
            for stat in ["count", "mean", "p50", "p90", "p99"] {
                c.push(format!("delay_{stat}_node{}", d.node));
            }
        }
        c.push("objective".into());
        c
    }

    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![
            self.generated as f64,
            self.completed as f64,
            self.lost as f64,
            self.min_remaining_energy,
        ];
        v.extend_from_slice(&self.remaining_energy);
        for t in &self.violations {
            v.push(t.violations as f64);
            v.push(t.rate());
        }
        v.extend([
            self.total_violations as f64,
            self.violation_rate,
            self.mean_delay,
            f64::from(u8::from(self.mean_delay_defined)),
        ]);
        for d in &self.node_delays {
            v.extend([d.count as f64, d.mean, d.p50, d.p90, d.p99]);
        }
        v.push(self.objective);
        v
    }

    pub fn row(&self, policy: &str, seed: u64) -> KpiRow {
        KpiRow {
            policy: policy.to_string(),
            seed: seed.to_string(),
            values: self.values(),
        }
    }
}

/// Column-wise mean of per-seed rows. Each column is summed in sorted order,
/// so the result does not depend on the order of the seeds.
pub fn average_rows(policy: &str, rows: &[KpiRow]) -> KpiRow {
    let width = rows.first().map_or(0, |r| r.values.len());
    let values = (0..width)
        .map(|c| {
            let mut col: Vec<f64> = rows.iter().map(|r| r.values[c]).collect();
            col.sort_by(f64::total_cmp);
            col.iter().sum::<f64>() / rows.len() as f64
        })
        .collect();
    KpiRow {
        policy: policy.to_string(),
        seed: "mean".into(),
        values,
    }
}
