use rand::Rng;
use serde::{Deserialize, Serialize};

use super::arrivals::generate_arrivals;
use super::event::{Event, EventKind, EventQueue};
use super::trace::{LedgerSnapshot, TraceRecord};
use crate::error::{Error, Result};
use crate::model::{
    ComputeNode, EnergyLogEntry, EnergyMeter, NodeRole, ScenarioConfig, Task, TaskId,
};
use crate::rng::{purpose, stream, SimRng};

/// What a policy sees when a task reaches its receiving UAV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub now: f64,
    pub task: TaskId,
    pub type_index: usize,
    pub num_types: usize,
    pub deadline: f64,
    pub is_fire: bool,
    pub receiver: usize,
    /// Realized IoT → receiver transmission delay of this task.
    pub iot_to_uav: f64,
    pub num_uav: usize,
    pub num_mec: usize,
    /// Queue drain plus running-task residual per node.
    pub cpu_delays: Vec<f64>,
    /// Remaining battery fraction per UAV.
    pub battery: Vec<f64>,
    /// False for depleted UAVs.
    pub available: Vec<bool>,
    /// Row-major base link delays between nodes.
    pub link_delays: Vec<f64>,
    /// This task's processing time on each node.
    pub processing: Vec<f64>,
}

impl Snapshot {
    pub fn num_nodes(&self) -> usize {
        self.num_uav + self.num_mec
    }

    pub fn role(&self, node: usize) -> NodeRole {
        if node < self.num_uav {
            NodeRole::Uav
        } else {
            NodeRole::Mec
        }
    }

    pub fn link(&self, from: usize, to: usize) -> f64 {
        self.link_delays[from * self.num_nodes() + to]
    }

    /// Deterministic end-to-end estimate if the task were sent to `dest`.
    pub fn estimated_delay(&self, dest: usize) -> f64 {
        self.iot_to_uav
            + self.link(self.receiver, dest)
            + self.cpu_delays[dest]
            + self.processing[dest]
    }

    /// Whether sending the task to `dest` is predicted to miss its deadline.
    /// Depleted UAVs always miss.
    pub fn estimated_violation(&self, dest: usize) -> bool {
        !self.available[dest] || self.estimated_delay(dest) > self.deadline
    }
}

/// Everything a reward scheme may need about a finished (or lost) task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionOutcome {
    pub task: Task,
    /// The deciding agent (the receiving UAV).
    pub agent: usize,
    pub deadline: f64,
    pub is_fire: bool,
    /// Lost to a depleted UAV rather than completed.
    pub depleted: bool,
    pub at: f64,
    /// Remaining battery fraction per UAV at `at`.
    pub battery: Vec<f64>,
    /// Decision-time violation estimate for each possible destination.
    pub estimated_violation: Vec<bool>,
    /// Mean end-to-end delay of the tasks completed so far at the destination,
    /// including this one.
    pub destination_mean_delay: f64,
}

impl CompletionOutcome {
    pub fn violated(&self) -> bool {
        self.task.violated.unwrap_or(true)
    }

    pub fn destination(&self) -> usize {
        self.task.destination.expect("outcomes exist only for dispatched tasks")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub task: TaskId,
    pub agent: usize,
    pub action: usize,
    pub snapshot: Snapshot,
}

/// Decision interface shared by every offloading policy.
pub trait OffloadingPolicy {
    fn name(&self) -> &str;

    /// Called once before the first arrival of a run.
    fn begin_episode(&mut self, _cfg: &ScenarioConfig) {}

    /// Picks a destination node for the task described by `ctx`.
    fn decide(&mut self, ctx: &Snapshot, rng: &mut SimRng) -> usize;

    /// Called when a decided task completes or is lost.
    fn on_completion(&mut self, _outcome: &CompletionOutcome) -> Option<LedgerSnapshot> {
        None
    }

    /// Called once after the last event of a run.
    fn end_episode(&mut self) {}
}

impl<P: OffloadingPolicy + ?Sized> OffloadingPolicy for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn begin_episode(&mut self, cfg: &ScenarioConfig) {
        (**self).begin_episode(cfg)
    }
    fn decide(&mut self, ctx: &Snapshot, rng: &mut SimRng) -> usize {
        (**self).decide(ctx, rng)
    }
    fn on_completion(&mut self, outcome: &CompletionOutcome) -> Option<LedgerSnapshot> {
        (**self).on_completion(outcome)
    }
    fn end_episode(&mut self) {
        (**self).end_episode()
    }
}

/// Seeds of one run. The workload (arrivals and link jitter) depends only on
/// `workload`, so different policies evaluated on the same seed see the same
/// tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSeeds {
    pub workload: u64,
    pub policy: u64,
}

impl RunSeeds {
    pub fn same(seed: u64) -> Self {
        RunSeeds {
            workload: seed,
            policy: seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// All generated tasks, indexed by id.
    pub tasks: Vec<Task>,
    pub decisions: Vec<DecisionRecord>,
    /// Completions and losses of decided tasks, in event order.
    pub completions: Vec<CompletionOutcome>,
    pub trace: Vec<TraceRecord>,
    /// Time of the last event (never before the arrival horizon).
    pub final_time: f64,
    pub nodes: Vec<ComputeNode>,
    /// End-of-mission battery fraction per UAV: base load over the horizon,
    /// CPU surcharge over every run (see `EnergyMeter::horizon_remaining`).
    pub final_energy: Vec<f64>,
    /// Order in which tasks started on each node's CPU.
    pub start_order: Vec<Vec<TaskId>>,
    /// Arrival order at each node's queue.
    pub arrival_order: Vec<Vec<TaskId>>,
}

impl RunOutcome {
    pub fn num_generated(&self) -> usize {
        self.tasks.len()
    }

    pub fn num_completed(&self) -> usize {
        self.tasks.iter().filter(|t| t.completed_at.is_some()).count()
    }

    pub fn num_lost(&self) -> usize {
        self.tasks
            .iter()
            .filter(|t| t.completed_at.is_none() && t.violated == Some(true))
            .count()
    }

    /// CPU runs recorded in the trace, for the energy audit.
    pub fn energy_log(&self) -> Vec<EnergyLogEntry> {
        self.trace
            .iter()
            .filter_map(|r| match r {
                TraceRecord::Completion {
                    destination: Some(node),
                    delay,
                    ..
                } if delay.processing > 0.0 => Some(EnergyLogEntry {
                    node: *node,
                    processing: delay.processing,
                }),
                _ => None,
            })
            .collect()
    }
}

struct Engine<'a, P: ?Sized> {
    cfg: &'a ScenarioConfig,
    policy: &'a mut P,
    policy_rng: SimRng,
    events: EventQueue,
    clock: f64,
    nodes: Vec<ComputeNode>,
    tasks: Vec<Task>,
    relay_jitter: Vec<f64>,
    link_matrix: Vec<f64>,
    start_pending: Vec<bool>,
    arrived_at_node: Vec<f64>,
    decision_of: Vec<Option<usize>>,
    decisions: Vec<DecisionRecord>,
    completions: Vec<CompletionOutcome>,
    trace: Vec<TraceRecord>,
    node_delay_stats: Vec<(f64, usize)>,
    start_order: Vec<Vec<TaskId>>,
    arrival_order: Vec<Vec<TaskId>>,
}

/// Runs one episode of `cfg` under `policy` until every generated task has
/// completed or been lost.
pub fn run<P: OffloadingPolicy + ?Sized>(
    cfg: &ScenarioConfig,
    policy: &mut P,
    seeds: RunSeeds,
) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut arrival_rng = stream(seeds.workload, &[purpose::ARRIVALS]);
    let mut tasks = generate_arrivals(cfg, &mut arrival_rng);

    // Two jitter draws per task in id order: IoT uplink, then relay.
    let mut link_rng = stream(seeds.workload, &[purpose::LINKS]);
    let mut relay_jitter = Vec::with_capacity(tasks.len());
    let mut events = EventQueue::new();
    for task in &mut tasks {
        let up = cfg
            .link_delays
            .jittered(cfg.link_delays.iot_uav_delay, link_rng.random::<f64>());
        relay_jitter.push(link_rng.random::<f64>());
        task.delay.iot_to_uav = up;
        events.push(Event {
            at: task.created_at + up,
            kind: EventKind::TaskArrivalAtUav,
            task: Some(task.id),
            node: Some(task.receiver),
        });
    }
    events.push(Event {
        at: cfg.sim_duration,
        kind: EventKind::SimEnd,
        task: None,
        node: None,
    });

    let nodes: Vec<ComputeNode> = (0..cfg.num_uav)
        .map(|j| {
            ComputeNode::uav(
                j,
                EnergyMeter::new(cfg.energy_profiles[j].clone(), cfg.seconds_per_hour),
            )
        })
        .chain((cfg.num_uav..cfg.num_nodes()).map(ComputeNode::mec))
        .collect();

    let n_tasks = tasks.len();
    let n_nodes = cfg.num_nodes();
    let mut engine = Engine {
        cfg,
        policy,
        policy_rng: stream(seeds.policy, &[purpose::POLICY]),
        events,
        clock: 0.0,
        nodes,
        tasks,
        relay_jitter,
        link_matrix: cfg.link_delays.matrix(cfg.num_uav, cfg.num_mec),
        start_pending: vec![false; n_nodes],
        arrived_at_node: vec![0.0; n_tasks],
        decision_of: vec![None; n_tasks],
        decisions: Vec::with_capacity(n_tasks),
        completions: Vec::with_capacity(n_tasks),
        trace: Vec::with_capacity(2 * n_tasks),
        node_delay_stats: vec![(0.0, 0); n_nodes],
        start_order: vec![Vec::new(); n_nodes],
        arrival_order: vec![Vec::new(); n_nodes],
    };
    engine.policy.begin_episode(cfg);
    while let Some(event) = engine.events.pop() {
        debug_assert!(event.at >= engine.clock);
        engine.clock = event.at;
        engine.handle(event)?;
    }
    engine.policy.end_episode();

    let final_time = engine.clock.max(cfg.sim_duration);
    let final_energy = engine.nodes[..cfg.num_uav]
        .iter()
        .map(|n| {
            n.meter()
                .expect("UAVs carry meters")
                .horizon_remaining(cfg.sim_duration, final_time)
        })
        .collect();
    Ok(RunOutcome {
        tasks: engine.tasks,
        decisions: engine.decisions,
        completions: engine.completions,
        trace: engine.trace,
        final_time,
        nodes: engine.nodes,
        final_energy,
        start_order: engine.start_order,
        arrival_order: engine.arrival_order,
    })
}

impl<P: OffloadingPolicy + ?Sized> Engine<'_, P> {
    fn handle(&mut self, event: Event) -> Result<()> {
        match event.kind {
            EventKind::TaskArrivalAtUav => self.on_arrival_at_uav(event.task.expect("task")),
            EventKind::TaskArrivalAtDestination => {
                self.on_arrival_at_destination(event.task.expect("task"), event.node.expect("node"));
                Ok(())
            }
            EventKind::TaskStartProcessing => {
                self.on_start(event.node.expect("node"));
                Ok(())
            }
            EventKind::TaskCompleted => {
                self.on_completed(event.task.expect("task"), event.node.expect("node"));
                Ok(())
            }
            EventKind::SimEnd => Ok(()),
        }
    }

    fn battery_levels(&self, now: f64) -> Vec<f64> {
        self.nodes[..self.cfg.num_uav]
            .iter()
            .map(|n| n.remaining_energy(now).expect("engine clock is monotone"))
            .collect()
    }

    fn snapshot(&self, task: &Task) -> Snapshot {
        let now = self.clock;
        let task_type = &self.cfg.task_types[task.type_index];
        Snapshot {
            now,
            task: task.id,
            type_index: task.type_index,
            num_types: self.cfg.task_types.len(),
            deadline: task_type.deadline,
            is_fire: task_type.is_fire(),
            receiver: task.receiver,
            iot_to_uav: task.delay.iot_to_uav,
            num_uav: self.cfg.num_uav,
            num_mec: self.cfg.num_mec,
            cpu_delays: self.nodes.iter().map(|n| n.cpu_delay(now)).collect(),
            battery: self.battery_levels(now),
            available: self.nodes.iter().map(|n| !n.is_depleted(now)).collect(),
            link_delays: self.link_matrix.clone(),
            processing: self
                .nodes
                .iter()
                .map(|n| task_type.processing_time(n.role))
                .collect(),
        }
    }

    fn on_arrival_at_uav(&mut self, id: TaskId) -> Result<()> {
        let idx = id.0 as usize;
        let receiver = self.tasks[idx].receiver;
        if self.nodes[receiver].is_depleted(self.clock) {
            self.lose(id, None);
            return Ok(());
        }
        let snapshot = self.snapshot(&self.tasks[idx]);
        let action = self.policy.decide(&snapshot, &mut self.policy_rng);
        if action >= self.nodes.len() {
            return Err(Error::contract(format!(
                "policy {} chose node {action} but only {} nodes exist",
                self.policy.name(),
                self.nodes.len()
            )));
        }
        let relay = if action == receiver {
            0.0
        } else {
            let base = self.link_matrix[receiver * self.nodes.len() + action];
            self.cfg.link_delays.jittered(base, self.relay_jitter[idx])
        };
        let task = &mut self.tasks[idx];
        task.destination = Some(action);
        task.delay.relay = relay;
        self.trace.push(TraceRecord::Decision {
            at: self.clock,
            task: id,
            kind: task.kind,
            iot: task.origin_iot,
            source: receiver,
            destination: action,
            battery: snapshot.battery.clone(),
        });
        self.decision_of[idx] = Some(self.decisions.len());
        self.decisions.push(DecisionRecord {
            task: id,
            agent: receiver,
            action,
            snapshot,
        });
        self.events.push(Event {
            at: self.clock + relay,
            kind: EventKind::TaskArrivalAtDestination,
            task: Some(id),
            node: Some(action),
        });
        Ok(())
    }

    fn on_arrival_at_destination(&mut self, id: TaskId, node: usize) {
        if self.nodes[node].is_depleted(self.clock) {
            self.lose(id, Some(node));
            return;
        }
        let idx = id.0 as usize;
        self.arrived_at_node[idx] = self.clock;
        self.arrival_order[node].push(id);
        let processing = self.cfg.task_types[self.tasks[idx].type_index]
            .processing_time(self.nodes[node].role);
        self.nodes[node].enqueue(id, processing);
        self.schedule_start(node);
    }

    fn schedule_start(&mut self, node: usize) {
        let n = &self.nodes[node];
        if n.is_idle() && !self.start_pending[node] {
            if let Some(&head) = n.queue.front() {
                self.start_pending[node] = true;
                self.events.push(Event {
                    at: self.clock,
                    kind: EventKind::TaskStartProcessing,
                    task: Some(head),
                    node: Some(node),
                });
            }
        }
    }

    fn on_start(&mut self, node: usize) {
        self.start_pending[node] = false;
        if self.nodes[node].is_depleted(self.clock) {
            for id in self.nodes[node].drain_queue() {
                self.lose(id, Some(node));
            }
            return;
        }
        let Some(&head) = self.nodes[node].queue.front() else {
            return;
        };
        let idx = head.0 as usize;
        let processing = self.cfg.task_types[self.tasks[idx].type_index]
            .processing_time(self.nodes[node].role);
        self.nodes[node].start_next(self.clock, processing);
        self.start_order[node].push(head);
        let task = &mut self.tasks[idx];
        task.delay.queue_wait = self.clock - self.arrived_at_node[idx];
        task.delay.processing = processing;
        self.events.push(Event {
            at: self.clock + processing,
            kind: EventKind::TaskCompleted,
            task: Some(head),
            node: Some(node),
        });
    }

    fn on_completed(&mut self, id: TaskId, node: usize) {
        self.nodes[node].finish_running();
        if self.nodes[node].is_depleted(self.clock) {
            self.lose(id, Some(node));
        } else {
            let idx = id.0 as usize;
            let deadline = self.cfg.task_types[self.tasks[idx].type_index].deadline;
            let task = &mut self.tasks[idx];
            task.completed_at = Some(self.clock);
            let total = task.delay.total();
            task.violated = Some(total > deadline);
            let stats = &mut self.node_delay_stats[node];
            stats.0 += total;
            stats.1 += 1;
            self.finish(id);
        }
        self.schedule_start(node);
    }

    /// Marks a task as violated by depletion. `node` is where it was lost,
    /// `None` for the receiving UAV before any decision.
    fn lose(&mut self, id: TaskId, node: Option<usize>) {
        let task = &mut self.tasks[id.0 as usize];
        task.violated = Some(true);
        debug_assert!(node.is_none() || task.destination == node);
        self.finish(id);
    }

    fn finish(&mut self, id: TaskId) {
        let idx = id.0 as usize;
        let battery = self.battery_levels(self.clock);
        let task = self.tasks[idx].clone();
        let depleted = task.completed_at.is_none();
        let task_type = &self.cfg.task_types[task.type_index];
        let ledger = match self.decision_of[idx] {
            Some(d) => {
                let dest = task.destination.expect("decided");
                let (sum, count) = self.node_delay_stats[dest];
                let outcome = CompletionOutcome {
                    agent: task.receiver,
                    deadline: task_type.deadline,
                    is_fire: task_type.is_fire(),
                    depleted,
                    at: self.clock,
                    battery: battery.clone(),
                    estimated_violation: (0..self.nodes.len())
                        .map(|n| self.decisions[d].snapshot.estimated_violation(n))
                        .collect(),
                    destination_mean_delay: if count > 0 {
                        sum / count as f64
                    } else {
                        task.delay.total()
                    },
                    task: task.clone(),
                };
                let ledger = self.policy.on_completion(&outcome);
                self.completions.push(outcome);
                ledger
            }
            None => None,
        };
        self.trace.push(TraceRecord::Completion {
            at: self.clock,
            task: id,
            kind: task.kind,
            source: task.receiver,
            destination: task.destination,
            delay: task.delay,
            total: task.delay.total(),
            violated: task.violated.unwrap_or(true),
            depleted,
            battery,
            ledger,
        });
    }
}
