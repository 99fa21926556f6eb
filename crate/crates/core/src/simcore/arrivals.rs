use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::model::{ScenarioConfig, Task, TaskId};

/// Poisson task arrivals for every (device, task type) pair over
/// `[0, sim_duration]`, sorted by creation time.
///
/// Draw order is device-major, type-minor, so the same generator state always
/// yields the same workload. Ties in creation time keep that draw order, and
/// task ids are assigned in the final sorted order.
pub fn generate_arrivals(cfg: &ScenarioConfig, rng: &mut impl Rng) -> Vec<Task> {
    let mut drawn: Vec<(f64, usize, usize)> = Vec::new();
    for iot in 0..cfg.num_iot {
        for (type_index, task_type) in cfg.task_types.iter().enumerate() {
            let mean = cfg.device_mean_interarrival(task_type);
            let gaps = Exp::new(1.0 / mean).expect("positive rate");
            let mut t = 0.0;
            loop {
                t += gaps.sample(rng);
                if t > cfg.sim_duration {
                    break;
                }
                drawn.push((t, iot, type_index));
            }
        }
    }
    drawn.sort_by(|a, b| a.0.total_cmp(&b.0));
    drawn
        .into_iter()
        .enumerate()
        .map(|(serial, (at, iot, type_index))| {
            Task::new(
                TaskId(serial as u32),
                type_index,
                cfg.task_types[type_index].kind,
                iot,
                cfg.receiver_of(iot),
                at,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ArrivalScope, Scenario, TaskKind};
    use crate::rng::stream;

    fn single_type(kind: TaskKind, scope: ArrivalScope) -> ScenarioConfig {
        let mut cfg = Scenario::paper_default().scenario;
        cfg.task_types.retain(|t| t.kind == kind);
        cfg.num_iot = 1;
        cfg.iot_assignment = None;
        cfg.arrival_scope = scope;
        cfg
    }

    fn mean_count(cfg: &ScenarioConfig, runs: u64) -> f64 {
        (0..runs)
            .map(|s| generate_arrivals(cfg, &mut stream(s, &[1])).len() as f64)
            .sum::<f64>()
            / runs as f64
    }

    #[test]
    fn zero_duration_yields_nothing() {
        let mut cfg = Scenario::paper_default().scenario;
        cfg.sim_duration = 0.0;
        assert!(generate_arrivals(&cfg, &mut stream(3, &[])).is_empty());
    }

    #[test]
    fn fire_rate_matches_poisson_mean() {
        for scope in [ArrivalScope::PerDevice, ArrivalScope::Network] {
            let cfg = single_type(TaskKind::FireDetection, scope);
            let m = mean_count(&cfg, 1000);
            assert!((19.0..=21.0).contains(&m), "{m}");
        }
    }

    #[test]
    fn growth_rate_is_ten_per_device() {
        let cfg = single_type(TaskKind::GrowthMonitoring, ArrivalScope::PerDevice);
        let m = mean_count(&cfg, 1000);
        assert!((9.5..=10.5).contains(&m), "{m}");
    }

    #[test]
    fn network_scope_splits_rate_across_devices() {
        let mut cfg = single_type(TaskKind::FireDetection, ArrivalScope::Network);
        cfg.num_iot = 16;
        let m = mean_count(&cfg, 1000);
        assert!((19.0..=21.0).contains(&m), "{m}");
        cfg.arrival_scope = ArrivalScope::PerDevice;
        let m = mean_count(&cfg, 200);
        assert!((310.0..=330.0).contains(&m), "{m}");
    }

    #[test]
    fn sorted_with_sequential_ids_and_receivers() {
        let cfg = Scenario::paper_default().scenario;
        let tasks = generate_arrivals(&cfg, &mut stream(11, &[]));
        assert!(!tasks.is_empty());
        for (i, w) in tasks.windows(2).enumerate() {
            assert!(w[0].created_at <= w[1].created_at);
            assert_eq!(w[0].id, TaskId(i as u32));
        }
        for t in &tasks {
            assert!(t.created_at <= cfg.sim_duration);
            assert_eq!(t.receiver, t.origin_iot / 4);
        }
    }
}
