use crate::model::NodeRole;
use crate::rng::SimRng;
use crate::simcore::{OffloadingPolicy, Snapshot};

/// Successor of `prev` in the cyclic `order`; the first task goes to
/// `order[0]`.
pub fn rr_decide(prev: Option<usize>, order: &[usize]) -> usize {
    match prev.and_then(|p| order.iter().position(|&n| n == p)) {
        Some(i) => order[(i + 1) % order.len()],
        None => order[0],
    }
}

/// Queue times within this distance of the minimum count as minimal.
const QUEUE_TIE: f64 = 1e-12;

/// Lowest queuing time first, highest energy among those. The task is
/// offloaded only if the winner has more energy than the receiver; a MEC
/// server counts as having unlimited energy.
pub fn qhef_decide(s: &Snapshot) -> usize {
    let energy = |n: usize| match s.role(n) {
        NodeRole::Mec => f64::INFINITY,
        NodeRole::Uav => s.battery[n],
    };
    let min_queue = s.cpu_delays.iter().copied().fold(f64::INFINITY, f64::min);
    let mut winner: Option<usize> = None;
    for n in 0..s.num_nodes() {
        if s.cpu_delays[n] > min_queue + QUEUE_TIE {
            continue;
        }
        if winner.is_none_or(|w| energy(n) > energy(w)) {
            winner = Some(n);
        }
    }
    match winner {
        Some(w) if energy(w) > energy(s.receiver) => w,
        _ => s.receiver,
    }
}

/// Round robin over all nodes, shared by every UAV.
#[derive(Debug, Default, Clone)]
pub struct RoundRobin {
    prev: Option<usize>,
    order: Vec<usize>,
}

impl OffloadingPolicy for RoundRobin {
    fn name(&self) -> &str {
        "rr"
    }

    fn begin_episode(&mut self, cfg: &crate::model::ScenarioConfig) {
        self.order = (0..cfg.num_nodes()).collect();
        self.prev = None;
    }

    fn decide(&mut self, ctx: &Snapshot, _rng: &mut SimRng) -> usize {
        if self.order.len() != ctx.num_nodes() {
            self.order = (0..ctx.num_nodes()).collect();
        }
        let next = rr_decide(self.prev, &self.order);
        self.prev = Some(next);
        next
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Qhef;

impl OffloadingPolicy for Qhef {
    fn name(&self) -> &str {
        "qhef"
    }

    fn decide(&mut self, ctx: &Snapshot, _rng: &mut SimRng) -> usize {
        qhef_decide(ctx)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::TaskId;

    pub(crate) fn snapshot(cpu: &[f64], battery: &[f64], receiver: usize) -> Snapshot {
        let n = cpu.len();
        Snapshot {
            now: 0.0,
            task: TaskId(0),
            type_index: 0,
            num_types: 3,
            deadline: 1.0,
            is_fire: true,
            receiver,
            iot_to_uav: 0.05,
            num_uav: battery.len(),
            num_mec: n - battery.len(),
            cpu_delays: cpu.to_vec(),
            battery: battery.to_vec(),
            available: vec![true; n],
            link_delays: (0..n * n)
                .map(|i| {
                    let (a, b) = (i / n, i % n);
                    if a == b {
                        0.0
                    } else if a >= battery.len() || b >= battery.len() {
                        0.1
                    } else {
                        0.05
                    }
                })
                .collect(),
            processing: (0..n).map(|j| if j < battery.len() { 0.1 } else { 0.05 }).collect(),
        }
    }

    #[test]
    fn round_robin_cycles() {
        let order = [0, 1, 2, 3, 4];
        assert_eq!(rr_decide(Some(1), &order), 2);
        assert_eq!(rr_decide(Some(4), &order), 0);
        assert_eq!(rr_decide(None, &order), 0);
        let mut prev = None;
        let mut seen = [0; 5];
        for _ in 0..5 {
            let n = rr_decide(prev, &order);
            seen[n] += 1;
            prev = Some(n);
        }
        assert_eq!(seen, [1; 5]);
    }

    #[test]
    fn qhef_walkthroughs() {
        // All idle, equal batteries: the MEC wins on energy.
        let s = snapshot(&[0.0; 5], &[0.9; 4], 1);
        assert_eq!(qhef_decide(&s), 4);
        // The receiver alone has the shortest queue.
        let s = snapshot(&[0.3, 0.0, 0.3, 0.3, 0.3], &[0.9; 4], 1);
        assert_eq!(qhef_decide(&s), 1);
        // U2 is the shortest queue and has more energy than the receiver.
        let s = snapshot(&[0.3, 0.3, 0.0, 0.3, 0.3], &[0.9, 0.8, 0.9, 0.9], 1);
        assert_eq!(qhef_decide(&s), 2);
        // Same, but U2 has less energy: compute locally.
        let s = snapshot(&[0.3, 0.3, 0.0, 0.3, 0.3], &[0.9, 0.8, 0.7, 0.9], 1);
        assert_eq!(qhef_decide(&s), 1);
    }
}
