//! Domain types: task types and tasks, compute nodes, and the scenario file.

mod config;
mod energy;

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use config::{default_iot_assignment, ArrivalScope, Scenario, ScenarioConfig};
pub use energy::{total_energy_identity_check, EnergyLogEntry, EnergyMeter, EnergyProfile};

/// The three smart-farm workloads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    FireDetection,
    PestDetection,
    GrowthMonitoring,
}

impl TaskKind {
    pub fn label(self) -> &'static str {
        match self {
            TaskKind::FireDetection => "fire",
            TaskKind::PestDetection => "pest",
            TaskKind::GrowthMonitoring => "growth",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Workload parameters for one task type. Times are in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskType {
    pub kind: TaskKind,
    /// Mean inter-arrival time (1/λ).
    pub mean_interarrival: f64,
    pub deadline: f64,
    pub proc_time_uav: f64,
    pub proc_time_mec: f64,
}

impl TaskType {
    /// Fire tasks carry the steeper delay-risk exponent.
    pub fn is_fire(&self) -> bool {
        self.kind == TaskKind::FireDetection
    }

    pub fn processing_time(&self, role: NodeRole) -> f64 {
        match role {
            NodeRole::Uav => self.proc_time_uav,
            NodeRole::Mec => self.proc_time_mec,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if !finite_pos(self.mean_interarrival) {
            return Err(Error::config(format!(
                "{}: mean_interarrival must be > 0",
                self.kind
            )));
        }
        // An infinite deadline is allowed: such tasks can never violate.
        if !(self.deadline > 0.0) {
            return Err(Error::config(format!("{}: deadline must be > 0", self.kind)));
        }
        if !finite_pos(self.proc_time_uav) || !finite_pos(self.proc_time_mec) {
            return Err(Error::config(format!(
                "{}: processing times must be > 0",
                self.kind
            )));
        }
        if self.proc_time_mec >= self.proc_time_uav {
            return Err(Error::config(format!(
                "{}: MEC processing time must be below the UAV processing time",
                self.kind
            )));
        }
        Ok(())
    }
}

/// Identifier of a generated task. Serials follow generation-time order, so
/// together with the receiving UAV and creation time stored on the task it
/// identifies the ⟨receiver, generation time⟩ pair uniquely.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub u32);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// End-to-end delay split into its four summands (seconds).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DelayBreakdown {
    pub iot_to_uav: f64,
    pub relay: f64,
    pub queue_wait: f64,
    pub processing: f64,
}

impl DelayBreakdown {
    pub fn total(&self) -> f64 {
        self.iot_to_uav + self.relay + self.queue_wait + self.processing
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    /// Index into the scenario's task types.
    pub type_index: usize,
    pub kind: TaskKind,
    pub origin_iot: usize,
    /// UAV that first receives the task from its IoT device.
    pub receiver: usize,
    pub created_at: f64,
    pub delay: DelayBreakdown,
    pub destination: Option<usize>,
    pub completed_at: Option<f64>,
    /// Set once the outcome is known: end-to-end delay over deadline, or lost
    /// to a depleted UAV.
    pub violated: Option<bool>,
}

impl Task {
    pub fn new(
        id: TaskId,
        type_index: usize,
        kind: TaskKind,
        origin_iot: usize,
        receiver: usize,
        created_at: f64,
    ) -> Self {
        Task {
            id,
            type_index,
            kind,
            origin_iot,
            receiver,
            created_at,
            delay: DelayBreakdown::default(),
            destination: None,
            completed_at: None,
            violated: None,
        }
    }

    pub fn end_to_end_delay(&self) -> f64 {
        self.delay.total()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Uav,
    Mec,
}

/// A UAV or MEC server: one CPU fed by a FIFO queue. Node ids index the
/// combined set with UAVs first (`0..J`) and MEC servers after (`J..J+L`).
#[derive(Debug, Clone)]
pub struct ComputeNode {
    pub id: usize,
    pub role: NodeRole,
    pub queue: VecDeque<TaskId>,
    /// Task currently on the CPU with its start time and duration.
    pub running: Option<(TaskId, f64, f64)>,
    pub busy_until: f64,
    pub cpu_active_seconds: f64,
    /// Queued work in seconds of this node's CPU, excluding the running task.
    queued_work: f64,
    energy: Option<EnergyMeter>,
}

impl ComputeNode {
    pub fn uav(id: usize, meter: EnergyMeter) -> Self {
        ComputeNode {
            id,
            role: NodeRole::Uav,
            queue: VecDeque::new(),
            running: None,
            busy_until: 0.0,
            cpu_active_seconds: 0.0,
            queued_work: 0.0,
            energy: Some(meter),
        }
    }

    pub fn mec(id: usize) -> Self {
        ComputeNode {
            id,
            role: NodeRole::Mec,
            queue: VecDeque::new(),
            running: None,
            busy_until: 0.0,
            cpu_active_seconds: 0.0,
            queued_work: 0.0,
            energy: None,
        }
    }

    pub fn meter(&self) -> Option<&EnergyMeter> {
        self.energy.as_ref()
    }

    /// Battery fraction left at `now`. Rejected for MEC nodes and for queries
    /// that move backwards in time.
    pub fn remaining_energy(&self, now: f64) -> Result<f64> {
        match &self.energy {
            Some(meter) => meter.remaining_energy(now),
            None => Err(Error::contract(format!(
                "node {} is a MEC server and has no battery",
                self.id
            ))),
        }
    }

    /// True when the node is a UAV whose battery is exhausted at `now`.
    pub fn is_depleted(&self, now: f64) -> bool {
        self.energy.as_ref().is_some_and(|m| m.is_depleted(now))
    }

    pub fn is_idle(&self) -> bool {
        self.running.is_none()
    }

    pub fn enqueue(&mut self, task: TaskId, processing: f64) {
        self.queue.push_back(task);
        self.queued_work += processing;
    }

    /// Pops the queue head onto the CPU.
    pub fn start_next(&mut self, now: f64, processing: f64) -> Option<TaskId> {
        let task = self.queue.pop_front()?;
        self.queued_work = (self.queued_work - processing).max(0.0);
        if self.queue.is_empty() {
            self.queued_work = 0.0;
        }
        self.running = Some((task, now, processing));
        self.busy_until = now + processing;
        if let Some(meter) = &mut self.energy {
            meter.begin_processing(now, processing);
        }
        Some(task)
    }

    pub fn finish_running(&mut self) -> Option<TaskId> {
        let (task, _, processing) = self.running.take()?;
        self.cpu_active_seconds += processing;
        if let Some(meter) = &mut self.energy {
            meter.finish_processing();
        }
        Some(task)
    }

    /// Drops every queued task, returning them in FIFO order.
    pub fn drain_queue(&mut self) -> Vec<TaskId> {
        self.queued_work = 0.0;
        self.queue.drain(..).collect()
    }

    /// Queue-drain estimate at `now`: residual of the running task plus all
    /// queued work.
    pub fn cpu_delay(&self, now: f64) -> f64 {
        let residual = match self.running {
            Some(_) => (self.busy_until - now).max(0.0),
            None => 0.0,
        };
        residual + self.queued_work
    }
}
