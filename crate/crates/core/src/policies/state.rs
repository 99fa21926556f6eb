use crate::error::{Error, Result};
use crate::simcore::Snapshot;

/// The agent's view of the network when a task arrives.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedState {
    pub task_type: usize,
    pub num_types: usize,
    /// Per node, indexed over all compute nodes.
    pub cpu_delays: Vec<f64>,
    /// Per UAV, in [0, 1].
    pub battery_levels: Vec<f64>,
    /// Row-major node × node matrix with a zero diagonal.
    pub link_delays: Vec<f64>,
    pub receiver: usize,
    pub num_uav: usize,
}

impl ObservedState {
    pub fn from_snapshot(s: &Snapshot) -> Self {
        ObservedState {
            task_type: s.type_index,
            num_types: s.num_types,
            cpu_delays: s.cpu_delays.clone(),
            battery_levels: s.battery.clone(),
            link_delays: s.link_delays.clone(),
            receiver: s.receiver,
            num_uav: s.num_uav,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.cpu_delays.len()
    }

    /// `K + N + J + N² + J` for `K` task types, `N` nodes and `J` UAVs.
    pub fn encoded_len(num_types: usize, num_uav: usize, num_nodes: usize) -> usize {
        num_types + num_nodes + num_uav + num_nodes * num_nodes + num_uav
    }

    /// Task one-hot, CPU delays, batteries, link matrix, receiver one-hot.
    pub fn encode(&self) -> Vec<f64> {
        let n = self.num_nodes();
        let mut v = Vec::with_capacity(Self::encoded_len(self.num_types, self.num_uav, n));
        v.extend((0..self.num_types).map(|k| f64::from(u8::from(k == self.task_type))));
        v.extend_from_slice(&self.cpu_delays);
        v.extend_from_slice(&self.battery_levels);
        v.extend_from_slice(&self.link_delays);
        v.extend((0..self.num_uav).map(|j| f64::from(u8::from(j == self.receiver))));
        v
    }

    pub fn decode(v: &[f64], num_types: usize, num_uav: usize, num_nodes: usize) -> Result<Self> {
        let want = Self::encoded_len(num_types, num_uav, num_nodes);
        if v.len() != want {
            return Err(Error::contract(format!(
                "state vector has {} entries, expected {want}",
                v.len()
            )));
        }
        let one_hot = |s: &[f64]| -> Result<usize> {
            let hot: Vec<usize> = (0..s.len()).filter(|&i| s[i] == 1.0).collect();
            match hot.as_slice() {
                [i] if s.iter().filter(|&&x| x != 0.0).count() == 1 => Ok(*i),
                _ => Err(Error::contract("malformed one-hot block")),
            }
        };
        let mut at = 0;
        let mut take = |len: usize| {
            let s = &v[at..at + len];
            at += len;
            s
        };
        let task_type = one_hot(take(num_types))?;
        let cpu_delays = take(num_nodes).to_vec();
        let battery_levels = take(num_uav).to_vec();
        let link_delays = take(num_nodes * num_nodes).to_vec();
        let receiver = one_hot(take(num_uav))?;
        Ok(ObservedState {
            task_type,
            num_types,
            cpu_delays,
            battery_levels,
            link_delays,
            receiver,
            num_uav,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ObservedState {
        let n = 5;
        ObservedState {
            task_type: 2,
            num_types: 3,
            cpu_delays: vec![0.0, 0.3, 0.1, 2.0, 0.05],
            battery_levels: vec![1.0, 0.97, 0.5, 0.0],
            link_delays: (0..n * n)
                .map(|i| if i / n == i % n { 0.0 } else { 0.05 + (i % 3) as f64 * 0.05 })
                .collect(),
            receiver: 1,
            num_uav: 4,
        }
    }

    #[test]
    fn paper_layout_has_41_entries() {
        assert_eq!(ObservedState::encoded_len(3, 4, 5), 41);
        let s = sample();
        let v = s.encode();
        assert_eq!(v.len(), 41);
        assert_eq!(&v[..3], &[0.0, 0.0, 1.0]);
        assert_eq!(&v[37..], &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn decode_inverts_encode() {
        let s = sample();
        assert_eq!(ObservedState::decode(&s.encode(), 3, 4, 5).unwrap(), s);
        assert!(ObservedState::decode(&[0.0; 40], 3, 4, 5).is_err());
    }
}
