//! Helpers shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use riskfleet::model::{
    total_energy_identity_check, ArrivalScope, EnergyProfile, Scenario, ScenarioConfig, TaskKind,
    TaskType,
};
use riskfleet::neural::{
    masked_argmax, td_update, Bootstrap, QNetwork, Regression, ReplayBuffer, Signal, TrainConfig,
    Transition,
};
use riskfleet::rng::{stream, SimRng};
use riskfleet::simcore::{LinkDelayModel, OffloadingPolicy, RunOutcome, Snapshot, TraceRecord};

/// Uniform over all nodes, depleted or not.
pub struct UniformPolicy;

impl OffloadingPolicy for UniformPolicy {
    fn name(&self) -> &str {
        "uniform"
    }

    fn decide(&mut self, ctx: &Snapshot, rng: &mut SimRng) -> usize {
        rng.random_range(0..ctx.num_nodes())
    }
}

/// A small random scenario. Roughly one in four has batteries small enough
/// to run dry within the horizon.
pub fn random_scenario(rng: &mut impl Rng) -> ScenarioConfig {
    let num_uav = rng.random_range(1..=5);
    let num_mec = rng.random_range(1..=2);
    let kinds = [TaskKind::FireDetection, TaskKind::PestDetection, TaskKind::GrowthMonitoring];
    let task_types = (0..rng.random_range(1..=3))
        .map(|k| {
            let uav: f64 = rng.random_range(0.01..1.0);
            TaskType {
                kind: kinds[k],
                mean_interarrival: rng.random_range(0.1..3.0),
                deadline: if rng.random_bool(0.1) {
                    f64::INFINITY
                } else {
                    rng.random_range(0.2..5.0)
                },
                proc_time_uav: uav,
                proc_time_mec: uav * rng.random_range(0.1..0.99),
            }
        })
        .collect();
    let tiny = rng.random_bool(0.25);
    let energy_profiles = (0..num_uav)
        .map(|_| EnergyProfile {
            battery_capacity: if tiny {
                rng.random_range(0.5..6.0)
            } else {
                rng.random_range(100.0..1000.0)
            },
            hover_power: rng.random_range(1.0..300.0),
            antenna_power: rng.random_range(1.0..30.0),
            cpu_idle_power: rng.random_range(100.0..5000.0),
            cpu_active_power: rng.random_range(5001.0..15000.0),
        })
        .collect();
    ScenarioConfig {
        num_iot: rng.random_range(1..=20),
        num_uav,
        num_mec,
        task_types,
        sim_duration: if rng.random_bool(0.05) { 0.0 } else { rng.random_range(0.5..5.0) },
        iot_assignment: None,
        link_delays: LinkDelayModel {
            iot_uav_delay: rng.random_range(0.0..0.2),
            uav_uav_delay: rng.random_range(0.0..0.2),
            uav_mec_delay: rng.random_range(0.0..0.3),
            jitter_fraction: rng.random_range(0.0..0.5),
        },
        energy_profiles,
        rng_seed: 0,
        arrival_scope: if rng.random_bool(0.5) {
            ArrivalScope::Network
        } else {
            ArrivalScope::PerDevice
        },
        seconds_per_hour: 3600.0,
    }
}

const EPS: f64 = 1e-9;

/// Checks a finished run against the simulator's conservation laws. Returns
/// the name of the first violated property.
pub fn audit(cfg: &ScenarioConfig, out: &RunOutcome) -> Result<(), String> {
    // Conservation: every task ends exactly once.
    let n = out.tasks.len();
    if out.num_completed() + out.num_lost() != n {
        return Err(format!(
            "conservation: {} completed + {} lost != {n} generated",
            out.num_completed(),
            out.num_lost()
        ));
    }
    let mut ended = vec![0usize; n];
    for r in &out.trace {
        if let TraceRecord::Completion { task, .. } = r {
            ended[task.0 as usize] += 1;
        }
    }
    if ended.iter().any(|&c| c != 1) {
        return Err("conservation: a task has no or several completion records".into());
    }
    if out.tasks.iter().any(|t| t.created_at > cfg.sim_duration + EPS) {
        return Err("conservation: arrival after the horizon".into());
    }

    // Causality: trace in time order, delays non-negative and summing to the
    // end-to-end time.
    if out.trace.windows(2).any(|w| w[1].at() < w[0].at()) {
        return Err("causality: trace out of time order".into());
    }
    for t in &out.tasks {
        let d = &t.delay;
        if [d.iot_to_uav, d.relay, d.queue_wait, d.processing]
            .iter()
            .any(|&x| !(x >= -EPS))
        {
            return Err(format!("causality: negative delay component on task {}", t.id.0));
        }
        if let Some(done) = t.completed_at {
            if (done - t.created_at - d.total()).abs() > EPS * done.max(1.0) {
                return Err(format!("causality: delays of task {} do not add up", t.id.0));
            }
            let deadline = cfg.task_types[t.type_index].deadline;
            if t.violated != Some(d.total() > deadline) {
                return Err(format!("causality: wrong violation flag on task {}", t.id.0));
            }
        }
    }

    // FIFO: each node starts tasks in arrival order.
    for (node, (started, arrived)) in out.start_order.iter().zip(&out.arrival_order).enumerate() {
        if started.len() > arrived.len() || started[..] != arrived[..started.len()] {
            return Err(format!("fifo: node {node} started out of arrival order"));
        }
    }

    // Monotone drain: battery readings along the trace never increase.
    let mut last = vec![1.0f64; cfg.num_uav];
    for r in &out.trace {
        let battery = match r {
            TraceRecord::Decision { battery, .. } | TraceRecord::Completion { battery, .. } => battery,
        };
        for (j, &b) in battery.iter().enumerate() {
            if !(0.0..=1.0).contains(&b) || b > last[j] + EPS {
                return Err(format!("energy: UAV {j} battery rose or left [0, 1]"));
            }
            last[j] = b;
        }
    }
    // End-of-mission level: base load over the horizon plus every CPU run.
    let log = out.energy_log();
    for (j, &b) in out.final_energy.iter().enumerate() {
        let p = &cfg.energy_profiles[j];
        let work: f64 = log.iter().filter(|e| e.node == j).map(|e| e.processing).sum();
        let used = ((p.hover_power + p.antenna_power + p.cpu_idle_power) * cfg.sim_duration
            + (p.cpu_active_power - p.cpu_idle_power) * work)
            / cfg.seconds_per_hour;
        let want = ((p.battery_capacity - used) / p.battery_capacity).max(0.0);
        if (b - want).abs() > 1e-9 {
            return Err(format!("energy: UAV {j} final level {b} differs from {want}"));
        }
    }

    // Energy audit identity against the event log.
    for j in 0..cfg.num_uav {
        let meter = out.nodes[j].meter().ok_or("energy: UAV without a meter")?;
        if !total_energy_identity_check(j, meter, out.final_time, log.iter().copied()) {
            return Err(format!("energy: audit identity fails for UAV {j}"));
        }
    }
    Ok(())
}

pub fn paper() -> Scenario {
    Scenario::paper_default()
}

/// Largest relative gap between backprop and central differences over every
/// parameter of one random network and batch.
pub fn worst_gradient_error(seed: u64) -> f64 {
    let mut rng = stream(seed, &[0xF1D]);
    let mut sizes = vec![rng.random_range(2..7)];
    for _ in 0..rng.random_range(1..3) {
        sizes.push(rng.random_range(2..9));
    }
    sizes.push(rng.random_range(2..6));
    let mut net = QNetwork::new(&sizes, &mut rng);
    for l in net.layers_mut() {
        l.biases.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
    }
    let inputs: Vec<Vec<f64>> = (0..rng.random_range(1..5))
        .map(|_| (0..sizes[0]).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let out = *sizes.last().unwrap();
    let batch: Vec<Regression<'_>> = inputs
        .iter()
        .map(|x| Regression {
            input: x,
            action: rng.random_range(0..out),
            target: rng.random_range(-3.0..3.0),
        })
        .collect();
    let (_, grads) = net.loss_and_gradient(&batch);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for l in 0..net.layers().len() {
        let nw = net.layers()[l].weights.len();
        let nb = net.layers()[l].biases.len();
        for i in 0..nw + nb {
            let bump = |net: &mut QNetwork, d: f64| {
                let layer = &mut net.layers_mut()[l];
                if i < nw {
                    layer.weights[i] += d;
                } else {
                    layer.biases[i - nw] += d;
                }
            };
            bump(&mut net, h);
            let up = net.loss(&batch);
            bump(&mut net, -2.0 * h);
            let down = net.loss(&batch);
            bump(&mut net, h);
            let numeric = (up - down) / (2.0 * h);
            let analytic = if i < nw {
                grads.layers[l].weights[i]
            } else {
                grads.layers[l].biases[i - nw]
            };
            let scale = analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic - numeric).abs() / scale);
        }
    }
    worst
}

/// the first three states.
const NEXT: [[usize; 2]; 4] = [[1, 0], [2, 0], [3, 1], [0, 3]];
const REWARD: [[f64; 2]; 4] = [[0.0, 1.0], [0.0, 1.0], [0.0, 0.5], [10.0, 2.0]];

fn value_iteration(gamma: f64) -> [[f64; 2]; 4] {
    let mut q = [[0.0f64; 2]; 4];
    for _ in 0..2000 {
        let v: Vec<f64> = q.iter().map(|r| r[0].max(r[1])).collect();
        for s in 0..4 {
            for a in 0..2 {
                q[s][a] = REWARD[s][a] + gamma * v[NEXT[s][a]];
            }
        }
    }
    q
}

fn one_hot(s: usize) -> Vec<f32> {
    (0..4).map(|i| if i == s { 1.0 } else { 0.0 }).collect()
}


/// Trains a small net on the synthetic MDP and compares it with value iteration.
pub fn train_synthetic_mdp() -> Result<(), String> {
    let cfg = TrainConfig {
        learning_rate: 0.05,
        discount: 0.85,
        reward_scale: 0.1,
        target_sync_interval: 50,
        batch_size: 8,
        ..TrainConfig::default()
    };
    let exact = value_iteration(cfg.discount);
    let optimal: Vec<usize> = exact
        .iter()
        .map(|q| masked_argmax(q, &[true, true]).unwrap())
        .collect();
    if optimal != vec![0, 0, 0, 0] {
        return Err(format!("oracle sanity: {optimal:?}"));
    }

    let mut rng = stream(4, &[]);
    let mut net = QNetwork::new(&[4, 16, 2], &mut rng);
    let mut target = net.clone();
    let mut buffer = ReplayBuffer::new(64);
    for s in 0..4 {
        for a in 0..2 {
            buffer.push(Transition {
                state: one_hot(s),
                action: a,
                reward: REWARD[s][a],
                risk: 0.0,
                next_state: one_hot(NEXT[s][a]),
                terminal: false,
            });
        }
    }
    for step in 1..=8000 {
        let batch = buffer.sample(cfg.batch_size, &mut rng);
        td_update(&mut net, &target, &batch, &cfg, Signal::Reward, Bootstrap::Max).map_err(|e| e.to_string())?;
        if step % cfg.target_sync_interval == 0 {
            target = net.clone();
        }
    }
    for s in 0..4 {
        let x: Vec<f64> = one_hot(s).iter().map(|&v| f64::from(v)).collect();
        let q = net.forward(&x);
        if masked_argmax(&q, &[true, true]) != Some(optimal[s]) {
            return Err(format!("state {s}: {q:?}"));
        }
        for a in 0..2 {
            let want = exact[s][a] * cfg.reward_scale;
            if (q[a] - want).abs() >= 0.05 * want.abs().max(1.0) {
                return Err(format!("Q({s},{a}) = {} vs {want}", q[a]));
            }
        }
    }
    Ok(())
}
